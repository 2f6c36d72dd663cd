"""
Exceções customizadas da aplicação
"""
from typing import Any, Optional


class BoxSupException(Exception):
    """Exceção base da aplicação"""

    def __init__(
        self,
        message: str = "Erro na execução",
        code: str = "Error",
        exit_code: int = 1,
        details: Optional[Any] = None
    ):
        self.message = message
        self.code = code
        self.exit_code = exit_code
        self.details = details
        super().__init__(f"[{code}] {message}")


class DataException(BoxSupException):
    """Erro de execução ou de dados (exit 1)"""

    def __init__(self, message: str = "Erro nos dados", code: str = "DataError", details: Optional[Any] = None):
        super().__init__(message=message, code=code, exit_code=1, details=details)


class ConfigException(BoxSupException):
    """Erro de uso ou de configuração (exit 2)"""

    def __init__(self, message: str = "Configuração inválida", details: Optional[Any] = None):
        super().__init__(message=message, code="ConfigError", exit_code=2, details=details)


class EmptyMaskException(DataException):
    """Máscara sem nenhum pixel de frente"""

    def __init__(self, message: str = "Máscara vazia", details: Optional[Any] = None):
        super().__init__(message=message, code="EmptyMask", details=details)


class BadRLEException(DataException):
    """Codificação run-length inválida"""

    def __init__(self, message: str = "RLE inválido", details: Optional[Any] = None):
        super().__init__(message=message, code="BadRLE", details=details)


class EmptyPoolException(DataException):
    """Pool de propostas sem segmentos"""

    def __init__(self, message: str = "Pool de propostas vazio", details: Optional[Any] = None):
        super().__init__(message=message, code="EmptyPool", details=details)


class UnsupervisedSampleException(DataException):
    """Amostra sem máscara e sem caixas"""

    def __init__(self, message: str = "Amostra sem supervisão", details: Optional[Any] = None):
        super().__init__(message=message, code="Unsupervised", details=details)


class NoSupervisedPixelsException(DataException):
    """Todos os pixels do alvo são IGNORE"""

    def __init__(self, message: str = "Nenhum pixel supervisionado", details: Optional[Any] = None):
        super().__init__(message=message, code="NoSupervisedPixels", details=details)


class DivergedGradientException(DataException):
    """Gradiente ou perda não finitos"""

    def __init__(self, message: str = "Gradiente divergiu", details: Optional[Any] = None):
        super().__init__(message=message, code="DivergedGradient", details=details)


class LabelOutOfRangeException(DataException):
    """Rótulo fora de {0..C-1} e diferente de IGNORE"""

    def __init__(self, message: str = "Rótulo fora do intervalo", details: Optional[Any] = None):
        super().__init__(message=message, code="LabelOutOfRange", details=details)


class BoxOutOfBoundsException(DataException):
    """Caixa fora dos limites da imagem"""

    def __init__(self, message: str = "Caixa fora da imagem", details: Optional[Any] = None):
        super().__init__(message=message, code="BoxOutOfBounds", details=details)


class DimensionMismatchException(DataException):
    """Dimensões incompatíveis entre operandos"""

    def __init__(self, message: str = "Dimensões incompatíveis", details: Optional[Any] = None):
        super().__init__(message=message, code="DimensionMismatch", details=details)


class MalformedFileException(DataException):
    """Arquivo com formato inválido"""

    def __init__(self, message: str = "Arquivo malformado", details: Optional[Any] = None):
        super().__init__(message=message, code="MalformedFile", details=details)


class MissingFileException(DataException):
    """Arquivo referenciado não existe"""

    def __init__(self, message: str = "Arquivo não encontrado", details: Optional[Any] = None):
        super().__init__(message=message, code="MissingFile", details=details)


class PlacementFailedException(DataException):
    """Gerador sintético não conseguiu posicionar as instâncias"""

    def __init__(self, message: str = "Posicionamento impossível", details: Optional[Any] = None):
        super().__init__(message=message, code="PlacementFailed", details=details)


class EmptyMatrixException(DataException):
    """Matriz de confusão sem pixels contados"""

    def __init__(self, message: str = "Matriz de confusão vazia", details: Optional[Any] = None):
        super().__init__(message=message, code="EmptyMatrix", details=details)


class UnsupportedBitDepthException(DataException):
    """Imagem ou máscara fora dos formatos de 8 bits aceitos"""

    def __init__(self, message: str = "Profundidade de bits não suportada", details: Optional[Any] = None):
        super().__init__(message=message, code="UnsupportedBitDepth", details=details)


class InconsistentAnnotationException(DataException):
    """Caixas, instâncias e máscara de uma amostra não concordam"""

    def __init__(self, message: str = "Anotações inconsistentes", details: Optional[Any] = None):
        super().__init__(message=message, code="InconsistentAnnotation", details=details)
