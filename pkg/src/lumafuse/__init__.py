"""Low-light image enhancement engine.

A differentiable ISP filter chain (white balance, gamma, contrast, sharpen)
fused with two small CNNs, embedding-space prompt losses with desk-scale
optimizers, full-reference IQA metrics, and an edge-deployment latency
harness with a framed-stream enhancement service.
"""

from .errors import FormatError, LumafuseError, ParameterError, ShapeError
from .filters import (
    FilterJacobian,
    IspParams,
    apply_pipeline,
    contrast,
    gamma_correct,
    gaussian_blur,
    gaussian_kernel,
    pipeline_jacobian,
    sharpen,
    white_balance,
)
from .image import Image, load_ppm, luminance, save_ppm
from .latency import (
    BenchReport,
    CLOUD_MODEL,
    EDGE_MODEL,
    LatencyModel,
    bench_pipeline,
    latency_curve,
    simulate_latency,
)
from .metrics import IqaReport, iqa_report, psnr, ssim, vif
from .nn import (
    WeightStore,
    batch_norm,
    conv2d,
    detail_forward,
    encoder_forward,
    enhance,
    load_weights,
    max_pool,
    random_weights,
    save_weights,
)
from .optim import (
    IterateSeries,
    OptimizerConfig,
    ParamsFit,
    PromptPairFit,
    PromptRefinement,
    fit_isp_params,
    generate_iterates,
    optimize_prompt_pair,
    refine_prompt,
)
from .prompts import (
    Embedding,
    EmbeddingProvider,
    Margins,
    PromptPair,
    StubProvider,
    TableProvider,
    correlation_r,
    load_embeddings,
    loss_cw,
    loss_ehc,
    loss_li,
    save_embeddings,
    similarity_g,
    test_encoder,
)
from .service import EnhanceServer, request_enhance

__version__ = "0.1.0"
