"""DOA-steered LCMV source separation for small far-field microphone arrays."""
from .beamforming import apply_beamformer, diffuse_coherence, lcmv_weights
from .doa import DoaGrid, DoaPair, doa_fit, separate, separate_tf, srp_init, srp_phat
from .geometry import ArrayGeometry, Doa, default_array, steering_vector, unit_direction, wavenumber
from .losses import LossSpec, spectral_loss, upit_loss
from .metrics import EvalReport, evaluate_scene, si_sdr, sir
from .postmask import ratio_mask
from .roomsim import RoomSpec, SceneSpec, diffuse_noise, make_scene, simulate_rir, window_rir
from .wola import Spectrogram, StftSpec, istft, stft

__version__ = "0.1.0"
