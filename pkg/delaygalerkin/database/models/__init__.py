from .check import CheckModel
from .run import RunModel

__all__ = ['RunModel', 'CheckModel']
