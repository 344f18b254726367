from . import bounds, compose, oneway, verify


COMMANDS = [verify, compose, oneway, bounds]
