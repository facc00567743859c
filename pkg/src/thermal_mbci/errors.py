class DimensionError(ValueError):
    """Matrix or index shapes are inconsistent."""


class SizeLimitError(ValueError):
    """Input exceeds a combinatorial size guard."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
