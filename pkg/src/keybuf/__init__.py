"""Key-buffer wiretap coding: simulator and exact secrecy verification."""

from .buffer import KeyBuffer, KeyDraw, fill_slots, minimum_capacity, occupancy_trace_check
from .channel import (
    ChannelAnalysis,
    Dmc,
    WiretapChannelSpec,
    analyze,
    bec,
    bec_pair,
    bsc,
    bsc_pair,
    compose,
    mutual_information,
    transmit,
)
from .leakage import (
    AnalyticInstance,
    JointDistribution,
    LeakageReport,
    build_joint,
    conditional_mi,
    negative_control_instance,
    toy_instance,
    verify_wiretap_term,
    verify_keyed_term,
    verify_window,
)
from .protocol import (
    ProtocolConfig,
    SlotPlan,
    SlotTrace,
    achieved_rate,
    asymptotic_rate,
    error_rate,
    plan_slot,
    run_simulation,
)
from .transport import LinearCode, decode_keyed, encode_keyed, otp_encrypt
from .wiretap import (
    BinnedCodebook,
    build_codebook,
    decode,
    encode,
    exact_single_slot_leakage,
)

__version__ = "0.1.0"
