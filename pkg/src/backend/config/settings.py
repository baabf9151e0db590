from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"

    # Parallelism
    DEFAULT_JOBS: int = 1
    JOBLIB_BACKEND: str = "loky"
    EVAL_CHUNK_CELLS: int = 8_000_000

    # Key generation and sampling
    MONOMIAL_BUDGET_FACTOR: int = 4
    INTERMEDIATE_BUDGET_FACTOR: int = 8
    SAMPLER_MAX_RETRIES: int = 200
    KEYGEN_MAX_ATTEMPTS: int = 8
    RNG_VERSION: str = "pcg64-v1"

    # Circuits and cryptovaluation
    MAX_OPERAND_WIDTH: int = 64
    MONOMIAL_POWER_EXPONENT: int = 3
    SECTION_KEY_FRACTION: float = 0.25
    SECTIONS_PER_WIRE: float = 0.5

    # Security estimators
    DEFAULT_CHI: float = 2.5
    EXACT_SEARCH_MAX_GATES: int = 24
    GREEDY_RESTARTS: int = 32

    class Config:
        env_file = ".env"
        env_prefix = "EHE_"


settings = Settings()
