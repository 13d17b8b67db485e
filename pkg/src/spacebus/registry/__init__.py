"""Service registry: leases, discovery, federation, request/response calls."""

from .core import Federation, ServiceEntry, SpaceRegistry
from .rpc import LocalRpcRouter, RegistryListener, RemoteRegistry, RpcServer, rpc_call

__all__ = [
    "Federation",
    "LocalRpcRouter",
    "RegistryListener",
    "RemoteRegistry",
    "RpcServer",
    "ServiceEntry",
    "SpaceRegistry",
    "rpc_call",
]
