from .core import Broker, Message, SubscriptionHandle
from .wire import decode_frame, encode_frame, read_frame

__all__ = [
    "Broker",
    "Message",
    "SubscriptionHandle",
    "encode_frame",
    "decode_frame",
    "read_frame",
]
