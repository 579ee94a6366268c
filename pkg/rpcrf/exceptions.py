"""
Error types raised by the pattern CRF library

Library code raises these; the management commands turn them into exit codes.
"""
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CAPACITY = 3
EXIT_DIVERGENCE = 4


class RPCRFError(Exception):
    """Base class for every error the library raises on purpose"""
    exit_code = EXIT_DATA


class PatternError(RPCRFError):
    """A pattern or label sequence that cannot be interpreted"""


class PatternSyntaxError(PatternError):
    """Malformed pattern text, with the offending character position"""

    def __init__(self, position: int, message: str, text: str = ""):
        self.position = position
        self.message = message
        self.text = text
        super().__init__(f"syntax error at position {position}: {message}"
                         + (f" in pattern {text!r}" if text else ""))


class UnknownSymbolError(PatternError):
    """A symbol outside the declared label alphabet"""

    def __init__(self, symbol: str, position: Optional[int] = None):
        self.symbol = symbol
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"symbol {symbol!r}{where} is not in the alphabet")


class DataFormatError(RPCRFError):
    """Malformed dataset, pattern file or model file"""


class ProductSizeExceeded(RPCRFError):
    """The product machine grew beyond the configured state cap"""
    exit_code = EXIT_CAPACITY

    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"product machine exceeds {limit} states; "
                         f"the pattern set is outside the tractable range")


class NumericDivergenceError(RPCRFError):
    """Training produced a non-finite objective"""
    exit_code = EXIT_DIVERGENCE

    def __init__(self, epoch: int, value: float):
        self.epoch = epoch
        self.value = value
        super().__init__(f"objective became non-finite ({value}) at epoch {epoch}")
