"""Toolkit for open systems of communicating finite-state machines.

Build machines and systems, project global types onto roles, decide
interface compatibility, synthesize gateways, compose open systems, and
verify deadlock-freedom, absence of orphan messages, and absence of
unspecified receptions by bounded exploration.
"""

from .cfsm import (
    Action,
    Cfsm,
    CfsmError,
    Channel,
    Direction,
    InvalidMachineError,
    MachineFormatError,
    Message,
    Role,
    StateKind,
    Transition,
    UnknownStateError,
    classify_state,
    has_mixed_states,
    is_io_deterministic,
    is_isomorphic,
    is_receive_deterministic,
    is_send_deterministic,
    machine_to_dot,
    parse_machine,
    serialize_machine,
)
from .compose import (
    CompatibilityVerdict,
    CompositionError,
    IncompatibleInterfacesError,
    LanguageMismatch,
    MixedState,
    NotIoDeterministic,
    check_compatibility,
    compose,
)
from .gateway import (
    GatewayPreconditionError,
    GatewayShapeError,
    GatewayState,
    contract,
    gateway,
    inserted_states,
)
from .globaltype import (
    Choice,
    End,
    GlobalType,
    GlobalTypeError,
    Interaction,
    Loop,
    ParseError,
    ProjectionError,
    Seq,
    UnknownRoleError,
    interaction,
    messages,
    parse_global_type,
    project,
    roles,
)
from .gtir import (
    Base,
    Connect,
    GtirError,
    GtirExpr,
    IncompatibleInterfaces,
    InterfaceCommunication,
    base,
    connect,
    load_global_types,
    parse_gtir,
    project_gtir,
    render_gtir,
    semantics,
    validate_gtir,
)
from .lang import (
    ErasedAutomaton,
    ErasedSymbol,
    dualize,
    erase_channels,
    format_word,
    languages_equal,
    separating_word,
)
from .safety import (
    PropertyVerdict,
    SafetyReport,
    VerdictStatus,
    check_safety,
    is_deadlock,
    is_orphan_message,
    is_unspecified_reception,
    render_report,
    report_to_doc,
)
from .system import (
    CommunicatingSystem,
    Configuration,
    ExplorationResult,
    InvalidSystemError,
    SystemMismatchError,
    enabled_actions,
    explore,
    initial_configuration,
    parse_system,
    serialize_system,
    step,
)

__version__ = "0.1.0"
