"""hypolog: incremental hypothetical answers over temporal Datalog streams.

The engine works in two phases.  An offline pass compiles a continuous
query into a finite set of precondition schemas; an online pass consumes
the stream tick by tick, maintaining the set of supported answers and
emitting them as they gain evidence, become definite, or get discarded.
"""

from .errors import (
    BudgetExceededError,
    HypologError,
    LimitExceededError,
    NegativeTimeError,
    NotEligibleError,
    NotStratifiedError,
    ParseError,
    SignatureError,
    SortError,
    StreamError,
    UnsafeRuleError,
)
from .parser import (
    ParseResult,
    TickBlock,
    format_program,
    format_stream,
    iter_stream_blocks,
    parse_atom_text,
    parse_literal_text,
    parse_program,
    parse_stream_tick,
)
from .program import Classification, PredicateInfo, Program, Query, validate_program
from .terms import (
    Atom,
    Literal,
    ObjectConst,
    ObjectVar,
    Rule,
    SourceSpan,
    Substitution,
    TimeExpr,
    TimePoint,
    apply_substitution,
    mgu,
)

__version__ = "0.1.0"
