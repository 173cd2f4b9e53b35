"""Certification of nonlocal and entangling quantum channels from Choi matrices."""
from .channels import (ChoiChannel, KrausChannel, SuperchannelChoi, apply, choi_from_kraus, choi_from_unitary,
                       compose, identity_channel, is_cptp, is_qns, is_superchannel, product_channel)
from .correlations import (BellFunctional, ConditionalDistribution, bell_value, build_witness, certify_ns, chsh,
                           is_local, is_nonsignaling, max_bell_local, max_bell_ns, witness_value)
from .dephasing import GramMatrix, decoherent_action, decoherent_distribution, dephase_state
from .bounds import negativity, npa_max, npa_membership
from .protocols import MeasurementFamily, ProtocolSpec, QuantumStrategy, lose_from_strategy, run_protocol
from .report import INCONCLUSIVE, INSIDE, OUTSIDE, CertificateReport, SolverError

__version__ = "0.1.0"
