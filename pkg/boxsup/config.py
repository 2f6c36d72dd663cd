"""
Configurações do processo usando Pydantic Settings

Apenas parâmetros de execução (log, progresso, paralelismo padrão).
Hiperparâmetros de experimento ficam no arquivo de configuração do run
(ver boxsup.schemas.config.RunConfig) e nunca são lidos do ambiente.
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Configurações principais do processo"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="BOXSUP_",
        case_sensitive=True,
        extra="ignore",
    )

    # Application
    APP_NAME: str = "BoxSup"
    APP_VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = Field(default="INFO", description="Nível do logger raiz")
    LOG_FORMAT: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="Formato das mensagens de log",
    )
    SHOW_PROGRESS: bool = Field(default=True, description="Exibe barras de progresso no stderr")

    # Paralelismo
    DEFAULT_WORKERS: int = Field(default=1, ge=1, description="Workers quando --workers não é informado")

    @property
    def debug(self) -> bool:
        """Indica se o processo roda em modo debug"""
        return self.LOG_LEVEL.upper() == "DEBUG"


# Instância global de configurações
settings = Settings()
