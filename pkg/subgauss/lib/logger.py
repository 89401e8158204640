"""Process-wide lab logger.

Library modules call ``Logger.get()`` at import time and share whatever
handlers exist; the CLI calls ``Logger.get(run_dir / "log.txt")`` once per
run so the same records also land in the run directory.
"""
import logging
import sys
from contextlib import contextmanager

LOG_FORMAT = "%(levelname)s %(asctime)s | %(message)s"
DATE_FORMAT = "%m/%d %H:%M:%S"
RAW = logging.Formatter("%(message)s")

# ANSI SGR codes
LEVEL_COLORS = {
    "DEBUG": 37,
    "INFO": 36,
    "WARNING": 33,
    "ERROR": 31,
    "CRITICAL": 41,
}


class ColorFormatter(logging.Formatter):
    def format(self, record):
        record = logging.makeLogRecord(record.__dict__)
        code = LEVEL_COLORS.get(record.levelname, 37)
        record.levelname = f"\033[{code}m{record.levelname}\033[0m"
        return super().format(record)


class Logger(logging.Logger):
    NAME = "SubgaussLab"

    @classmethod
    def get(cls, file_path=None, level="INFO", colorize=True):
        logging.setLoggerClass(cls)
        logger = logging.getLogger(cls.NAME)
        logging.setLoggerClass(logging.Logger)

        if not logger.handlers:
            logger.setLevel(level)
            logger.propagate = False
            # stdout: tables and reports are program output, not diagnostics
            stream = logging.StreamHandler(sys.stdout)
            fmt_cls = ColorFormatter if colorize else logging.Formatter
            stream.setFormatter(fmt_cls(LOG_FORMAT, DATE_FORMAT))
            logger.addHandler(stream)

        if file_path is not None:
            logger.close_file_handlers()
            logger.setLevel(level)
            handler = logging.FileHandler(file_path, encoding="utf-8")
            handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
            logger.addHandler(handler)

        return logger

    @contextmanager
    def _raw(self):
        saved = [h.formatter for h in self.handlers]
        for h in self.handlers:
            h.setFormatter(RAW)
        try:
            yield
        finally:
            for h, f in zip(self.handlers, saved):
                h.setFormatter(f)

    def nofmt(self, msg, *args, level="INFO", **kwargs):
        """Log ``msg`` (a string or anything printable, e.g. a PrettyTable) without prefix."""
        if isinstance(level, str):
            level = logging.getLevelName(level)
        with self._raw():
            self.log(level, msg, *args, **kwargs)

    def close_file_handlers(self):
        """Detach and close file handlers; the run directory may be removed next."""
        for handler in [h for h in self.handlers if isinstance(h, logging.FileHandler)]:
            handler.close()
            self.removeHandler(handler)
