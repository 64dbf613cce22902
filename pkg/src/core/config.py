import json
from typing import List, Union, Any
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator, AliasChoices

class Settings(BaseSettings):
    # Registry defaults
    SLEUTH_MODE: str = Field(default="Development")
    SLEUTH_ACTOR: str = Field(default="sleuth", validation_alias=AliasChoices("SLEUTH_ACTOR", "USER"))
    SLEUTH_CAPACITY: int = Field(default=10_000)
    SLEUTH_MAX_REFERENCES: int = Field(default=60)

    # Verbs still available in Operational mode
    SLEUTH_READ_ONLY_VERBS: Union[List[str], str] = Field(default=["check", "fix", "trace", "report"])

    # Data areas
    SLEUTH_ACCEPT_BLANK_AS_ZERO: bool = Field(default=False)
    SLEUTH_BOUNDS_SIGMA: float = Field(default=3.0)

    @field_validator("SLEUTH_READ_ONLY_VERBS", mode="before")
    @classmethod
    def parse_comma_separated_list(cls, v: Any) -> List[str]:
        if isinstance(v, str):
            v = v.strip()
            # Accept a JSON list too (["check", "fix"])
            if v.startswith("[") and v.endswith("]"):
                try:
                    return json.loads(v)
                except json.JSONDecodeError:
                    pass
            return [s.strip().lower() for s in v.split(",") if s.strip()]
        return v

    @field_validator("SLEUTH_MODE", mode="before")
    @classmethod
    def normalize_mode(cls, v: Any) -> str:
        if isinstance(v, str) and v.strip().lower() in ("development", "operational"):
            return v.strip().capitalize()
        raise ValueError(f"SLEUTH_MODE must be Development or Operational, got {v!r}")

    # Output
    SLEUTH_REPORT_FORMAT: str = Field(default="table")
    SLEUTH_VERBOSE: bool = Field(default=False)

    # HTTP surface (sleuth serve)
    SLEUTH_WORKBOOK_SET: str = Field(default="")
    SLEUTH_WATCHFILE: str = Field(default="")
    UVICORN_HOST: str = Field(default="0.0.0.0")
    UVICORN_PORT: int = Field(default=8084)

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

settings = Settings()
