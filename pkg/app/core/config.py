from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict


load_dotenv()


class Settings(BaseSettings):
    APP_TITLE: str = "statemark"
    APP_DESCRIPTION: str = (
        "Simulate and verify local state marking protocols, entanglement ledgers "
        "and the one-way LOCC feasibility search"
    )

    # Numerical tolerances
    NORM_TOL: float = 1e-9
    PRUNE_TOL: float = 1e-12
    FEAS_TOL: float = 1e-10
    GRAD_TOL: float = 1e-12

    # Witness search
    MAX_ITERATIONS: int = 10_000

    # Thread count for assignment / restart fan-out (LSM_WORKERS)
    WORKERS: int = 1

    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(env_prefix="LSM_", case_sensitive=True)

    def __repr__(self):
        """Short summary instead of the full field dump"""
        return (
            f"Settings(NORM_TOL={self.NORM_TOL}, WORKERS={self.WORKERS}, "
            f"LOG_LEVEL='{self.LOG_LEVEL}')"
        )


settings = Settings()
