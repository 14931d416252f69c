"""Qutrit circuit and noisy tensor-network simulator for AKLT chains."""

from .aklt import HamiltonianSpec, MpsState, aklt_mps, build_hamiltonian, ground_state_ed, mps_to_statevector
from .berry import (BerryRun, berry_phase_exact, berry_phase_hadamard, gauge_fix, hadamard_overlap,
                    ladder_prep_circuit, obc_prep_circuit, prepare_state)
from .circuit import QuditCircuit
from .compile import IsometryTarget, aklt_ladder_target, compile_isometry, decompose_single_site
from .fidelity import fidelities, fidelity_per_site, hellinger_fidelity, quantum_fidelity, two_norm_fidelity
from .gates import Gate, make_standard_gates
from .mpo import DensityMPO, run_noisy
from .noise import NoiseChannel, NoiseParams, amp_damp_channel, dephasing_channel, promote_superop
from .readout import BinaryReadoutModel, TernaryDistribution, hellinger_score, reconstruct_ternary
from .statevector import StateVector, apply_gate, measure_probabilities, run_circuit
from .sweep import fidelity_sweep, ladder_fidelity

__version__ = "0.1.0"
