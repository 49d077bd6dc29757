"""Exception base shared by nodes and transports."""


class ProtocolError(Exception):
    """A refusal carrying a stable machine-readable ``code``."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class TransportTimeout(TimeoutError):
    pass
