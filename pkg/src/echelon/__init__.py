"""Echelon data on lattices over a localized polynomial ring and their modifications."""

from .echelon_core import (
    DivisorChain,
    EchelonDatum,
    EchelonDecomposition,
    ValidationReport,
    decompose,
    normal_form,
    random_datum,
    reassemble,
    scalar_datum,
    transform_datum,
    validate_datum,
)
from .errors import (
    EchelonError,
    InternalBreach,
    MathFailure,
    ParseError,
    UsageError,
)
from .invariants import DivisorClassLedger, det_ledger, k_class_report
from .lattice import FracEntry, LatticeBasis, lattice_equal, membership, twist
from .modification import (
    MapToLine,
    ModificationChain,
    RingMap,
    extend_map,
    functoriality_transport,
    ladder,
    maximality_probe,
    modify,
    pullback_commute,
    quotient_report,
)
from .poly_ring import Field, Poly, PolyRing
from .polyechelon import (
    PolyEchelonDatum,
    PolyModificationState,
    check_transverse,
    induced_datum,
    order_independence_check,
    poly_modify,
)

__version__ = "0.1.0"
