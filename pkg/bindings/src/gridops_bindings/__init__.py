"""Agent-ecosystem bindings for the gridops simulator."""
from .wrapper import BindingsError, SpaceDescriptor, WrappedEnv, make

__version__ = "0.1.0"

__all__ = ["BindingsError", "SpaceDescriptor", "WrappedEnv", "make", "__version__"]
