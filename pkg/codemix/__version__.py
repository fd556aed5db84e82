"""To enable `codemix.__version__`"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("codemix")
except PackageNotFoundError:
    __version__ = "unknown"
