import logging
import sys


class Logger:
    @staticmethod
    def logger_setup(level: str | int = logging.INFO) -> logging.Logger:
        """
        Custom logger, writes to stderr so stdout stays free for report tables
        """
        logger = logging.getLogger("hawkes_calls")
        logging.basicConfig(
            level=level,
            format="%(asctime)s %(levelname)s %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
            stream=sys.stderr,
            force=True,
        )

        return logger


logger_instance = Logger()
logger = logger_instance.logger_setup()
