"""Physical-layer signature embedding and statistical detection for
synthetic 5G-like I/Q streams.

Pipeline: generate a set of Gaussian-mixture signature distributions kept
mutually distinguishable by a minimum KS distance, embed freshly sampled
signatures into baseband payload streams on a timed schedule (optionally
scaled toward the local signal level for stealth), impair the stream with
an AWGN channel, and detect/classify signatures on the receive side with
likelihood and KS statistics, replay tracking, and covertness analysis.
"""

from ._accel import BACKEND, NUMBA_AVAILABLE
from .baseband import (SAMPLES_PER_MS, ChannelConfig, IqStream, apply_channel,
                       generate_payload)
from .capture import CaptureFormatError, read_capture, write_capture
from .detector import (VERDICT_NO_SIGNATURE, VERDICT_UNKNOWN, DetectionReport,
                       DetectorConfig, EmptyDataset, LabeledWindow, ReplayCache,
                       WindowTooShort, check_replay, classify, detect_window,
                       energy_cdf, evaluate, extract_values)
from .embed import (EmbedRecord, EmbedSchedule, ScheduleTooDense, Signature,
                    StealthConfig, embed, make_signature, stealth_map,
                    stealth_unmap)
from .gmm import (AttemptsExhausted, GaussianComponent, GaussianMixture,
                  GenerationConfig, SamplingError, cdf, generate_signature_set,
                  ks_distance, ks_two_sample, load_signature_set,
                  pairwise_ks_matrix, pdf, sample, save_signature_set)
from .harness import (PRESETS, ConfigError, ExperimentConfig, MirrorBranch,
                      covertness_report, mirror, run_bench, run_dataset,
                      run_eval)
from .metrics import MetricsBundle
from .tensors import ShapeMismatch, export_tensors, read_tensors

__version__ = "0.1.0"
