"""
mrkernel: 계층적으로 분해한 bag-of-components 위의 multiresolution kernel.
"""

from .cli import app

__version__ = "0.1.0"


def main():
    app()
