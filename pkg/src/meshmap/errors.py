class MeshMapError(Exception):
    pass


class TreeParseError(MeshMapError, ValueError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class DomainError(MeshMapError, ValueError):
    pass


class ConfigError(MeshMapError):
    pass


class FormatError(MeshMapError, ValueError):
    pass


class FetchError(MeshMapError):
    pass
