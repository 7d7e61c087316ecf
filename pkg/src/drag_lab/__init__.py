"""Desk-scale trajectory-controlled video diffusion with entity-representation
conditioning."""

from .annotations import (
    ClipAnnotation,
    EntityAnnotation,
    annotation_from_dict,
    annotation_from_json,
    annotation_to_dict,
    annotation_to_json,
    rle_decode,
    rle_encode,
)
from .config import Config, DataConfig, FeatureConfig, ScheduleConfig, TrainConfig, load_config
from .corpus import (
    CorpusClip,
    TrainingSample,
    generate_corpus,
    make_training_sample,
    read_corpus,
    write_corpus,
)
from .denoiser import DenoiserConfig, VideoDenoiser, concatenate_first_frame
from .evaluation import EvalReport, evaluate, evaluate_grid, objmc, track_centroid
from .features import extract_entity_features, pool_embeddings
from .guidance import GuidanceEncoder, GuidanceLatent, combine_guidance, encode_guidance
from .model import DragVideoModel, build_model
from .representation import (
    EntityMask,
    Incircle,
    Trajectory,
    build_representation_sequences,
    compute_incircle,
    insert_entity_embedding,
    rasterize_gaussian,
)
from .sampling import GenerationRequest, SampleResult, sample_video
from .schedule import NoiseSchedule, forward_noise, make_schedule
from .service import create_app
from .synthetic import GeneratedClip, SceneSpec, ShapeSpec, generate_clip, random_scene
from .training import (
    load_model,
    masked_mse_loss,
    run_training,
    save_checkpoint,
    train_step,
)

__version__ = "0.1.0"
