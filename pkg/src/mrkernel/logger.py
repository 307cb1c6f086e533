"""
mrkernel 로깅.

라이브러리 모듈과 CLI가 하나의 `mrkernel` 로거를 공유합니다.
콘솔 출력은 rich 핸들러로 stderr에 보내고, stdout은 명령 결과(CSV 등) 전용으로 남깁니다.
"""

import logging
import time
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Iterator, Optional

from rich.console import Console
from rich.logging import RichHandler

FILE_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def _console_level(verbose: bool, quiet: bool) -> int:
    if quiet:
        return logging.ERROR
    if verbose:
        return logging.DEBUG
    return logging.WARNING


class MultiresLogger:
    """프로세스 단위 싱글톤 로거. 첫 생성 시의 설정이 유지됩니다."""

    _instance: Optional["MultiresLogger"] = None
    _initialized: bool = False

    def __new__(cls, *args, **kwargs):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(
        self,
        name: str = "mrkernel",
        log_dir: Optional[Path] = None,
        verbose: bool = False,
        quiet: bool = False,
    ):
        if MultiresLogger._initialized:
            return

        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        self.logger.handlers.clear()
        self.logger.propagate = False

        console_handler = RichHandler(
            console=Console(stderr=True),
            show_time=verbose,
            show_path=verbose,
            markup=False,
        )
        console_handler.setLevel(_console_level(verbose, quiet))
        self.logger.addHandler(console_handler)

        self.log_file: Optional[Path] = None
        if log_dir:
            log_dir = Path(log_dir)
            log_dir.mkdir(parents=True, exist_ok=True)
            self.log_file = log_dir / f"mrkernel_{datetime.now().strftime('%Y%m%d')}.log"
            file_handler = logging.FileHandler(self.log_file, encoding="utf-8")
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
            self.logger.addHandler(file_handler)

        MultiresLogger._initialized = True

    def debug(self, msg: str, *args, **kwargs):
        self.logger.debug(msg, *args, **kwargs)

    def info(self, msg: str, *args, **kwargs):
        self.logger.info(msg, *args, **kwargs)

    def warning(self, msg: str, *args, **kwargs):
        self.logger.warning(msg, *args, **kwargs)

    def error(self, msg: str, *args, **kwargs):
        self.logger.error(msg, *args, **kwargs)

    @contextmanager
    def stage(self, label: str) -> Iterator[None]:
        """파이프라인 단계의 소요 시간을 debug 레벨로 기록"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.logger.debug(f"{label}: {time.perf_counter() - start:.3f}s")

    @classmethod
    def reset(cls):
        """싱글톤 리셋 (테스트용)"""
        if cls._instance is not None and hasattr(cls._instance, "logger"):
            for handler in cls._instance.logger.handlers:
                handler.close()
            cls._instance.logger.handlers.clear()
        cls._instance = None
        cls._initialized = False


def get_logger(
    name: str = "mrkernel",
    verbose: bool = False,
    quiet: bool = False,
    log_dir: Optional[Path] = None,
) -> MultiresLogger:
    return MultiresLogger(name=name, verbose=verbose, quiet=quiet, log_dir=log_dir)
