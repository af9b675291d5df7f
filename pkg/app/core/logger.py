import logging
import sys

ROOT_LOGGER_NAME = "scenegpt"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_logger(name: str) -> logging.Logger:
    """
    Returns a logger under the application namespace.
    """
    if name.startswith("app."):
        name = name[len("app."):]
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")


def configure_logging(level: str | int = "WARNING") -> None:
    root = logging.getLogger(ROOT_LOGGER_NAME)
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            raise ValueError(f"Unknown log level: {level}")
    root.setLevel(level)

    # replace rather than add, so sys.stderr is looked up again on every call
    for handler in [h for h in root.handlers if getattr(h, "_scenegpt", False)]:
        root.removeHandler(handler)

    # stdout is reserved for command output
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._scenegpt = True
    root.addHandler(handler)
