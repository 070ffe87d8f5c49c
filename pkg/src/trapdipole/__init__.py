"""Simulation of two trapped polar molecules with quantized motion and
dipole-dipole exchange: AQRM spectra, trap-dipole resonances and microwave
two-qubit gate fidelities."""

__version__ = "0.1.0"

from .fock_algebra import (HilbertSpace, OperatorMatrix, annihilation, creation, embed,
                           number_operator, position_quadrature)
from .molecule_model import (CouplingConstants, PhysicalConfig, ddi_exact, ddi_operator,
                             derive_couplings, khz)
from .aqrm import (AnalyticLevel, AqrmSpec, AqrmSpectrum, analytic_spectrum_1d,
                   analytic_spectrum_3d, build_aqrm_1d, build_aqrm_3d, numeric_spectrum)
from .dynamics import (EvolvedEnsemble, MotionalEnsemble, ProtocolSpace, PulseSegment,
                       PulseSequence, assemble_gate_hamiltonian, ideal_reference, propagate,
                       run_sequence)
from .gates import (BlockadeCZ, GateResult, ISwapGate, PiPiGate, QuasiBlockadeGate,
                    effective_rates, ensemble_fidelity, pedersen_fidelity, trace_fidelity)
from .sweeps import (OptimumReport, SweepSpec, find_minima, motion_infidelity_curve,
                     optimize_iswap, resonance_scan)
