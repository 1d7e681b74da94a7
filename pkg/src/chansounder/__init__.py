"""Desk-scale simulator of multi-transmitter wireless channel sounding.

Two sounding chains over synthetic multipath channels: a sliding
correlator (PN sequence, RRC shaping, correlation-derived delay
profiles) and a stepped-frequency sweeper (bin-centered tones, FFT-bin
powers, narrowband losses). Multiple transmitters share the medium by
TDMA slots or tone-frequency plans, and scripted campaigns turn receiver
paths into per-location measurement records and heat-map exports.
"""

from chansounder._kernels import BACKEND as KERNEL_BACKEND
from chansounder.campaign import (
    MeasurementRecord,
    Scenario,
    Transmitter,
    export_heatmap,
    export_records,
    load_records,
    load_scenario,
    run_campaign,
    save_scenario,
)
from chansounder.channel import (
    EnvironmentModel,
    MultipathChannel,
    add_awgn,
    apply_channel,
    frequency_response,
    synthesize_channel,
)
from chansounder.exceptions import NoSignalError
from chansounder.multitx import (
    ClockModel,
    LeakageModel,
    SceneTransmitter,
    TdmaSchedule,
    active_transmitter,
    build_frequency_plan,
    build_schedule,
    compose_received,
    segment_capture,
)
from chansounder.pn import (
    ChipSequence,
    CorrelationProfile,
    circular_correlate,
    circular_correlate_direct,
    generate_glfsr,
    load_chips,
    periodic_chip,
    save_chips,
)
from chansounder.pulse import (
    BasebandSignal,
    FilterTaps,
    design_rrc,
    estimate_timing_phase,
    modulate,
    read_iq,
    recover_symbols,
    shape_symbols,
    write_iq,
)
from chansounder.sliding import (
    DelayProfile,
    SounderConfig,
    measure_sliding,
    rms_delay_spread,
    sound,
    wideband_path_loss,
)
from chansounder.sweep import (
    NarrowbandLossSet,
    PhaseNoiseSkirt,
    SweepPlan,
    bin_power,
    generate_tone,
    mean_wideband_path_loss,
    sweep_sound,
    temporal_resolution,
)

__version__ = "0.1.0"
