from .backends import (
    BackendConfig,
    BaseBackend,
    HttpChatBackend,
    ScriptedBackend,
    complete,
    create_backend,
)
from .messages import ChatMessage, Role, ToolCall, ToolSpec
from .usage import (
    EnergyModel,
    PricingModel,
    RoleUsage,
    UsageEntry,
    UsageLedger,
    cost_of,
    energy_of,
    merge_ledgers,
    record_usage,
)
