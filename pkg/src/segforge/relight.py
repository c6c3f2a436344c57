"""Relighting backends and the mask-area-weighted CIELAB re-blend.

The relighting model itself is an external service; this module owns the
request/response contract (HTTP backend plus a deterministic offline stub)
and the blend that restores original lightness/chroma per instance, with
smaller instances keeping more of their original appearance.
"""

import io
import math
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image

from . import kernels
from .color import LabPixel
from .compositor import InstanceStack, resolve_visible_masks
from .errors import BackendError
from .seeding import derive_seed


@dataclass
class BlendParams:
    alpha_min: float = 0.20
    alpha_max: float = 0.80
    s: float = 10.0
    beta: float = 0.10

    def validate(self):
        if not 0.0 <= self.alpha_min <= self.alpha_max <= 1.0:
            raise ValueError(f"need 0 <= alpha_min <= alpha_max <= 1, got [{self.alpha_min}, {self.alpha_max}]")
        if self.s <= 0:
            raise ValueError(f"sigmoid steepness must be positive, got {self.s}")
        if not 0.0 <= self.beta < 0.5:
            raise ValueError(f"beta must be in [0, 0.5), got {self.beta}")


@dataclass
class RelightRequest:
    composite: np.ndarray  # uint8 (H, W, 3)
    foreground_mask: np.ndarray  # bool (H, W), union of pasted foregrounds
    prompt: str
    seed: int | None = None  # stub backends mix this into their own seed


@dataclass
class RelightResponse:
    image: np.ndarray  # uint8 (H, W, 3), same dims as the request composite


def compute_blend_weight(area_px: int, a_min: int, a_max: int, params: BlendParams) -> float:
    """Blend weight for one instance from its visible area.

    The area is normalized to r in [0, 1] over this image's [a_min, a_max]
    span (r = 0.5 when the span is degenerate) and mapped through
    alpha_min + (alpha_max - alpha_min) * sigmoid(s * (1/2 - r)), so smaller
    areas get strictly higher weights.
    """
    if not a_min <= area_px <= a_max:
        raise ValueError(f"area {area_px} outside [{a_min}, {a_max}]")
    if a_min == a_max:
        r = 0.5
    else:
        r = (area_px - a_min) / (a_max - a_min)
    sig = 1.0 / (1.0 + math.exp(-params.s * (0.5 - r)))
    return params.alpha_min + (params.alpha_max - params.alpha_min) * sig


def blend_pixel(orig: LabPixel, relit: LabPixel, alpha: float, beta: float) -> LabPixel:
    """Lightness interpolates by alpha toward the original; chroma by beta
    toward the relit image. Both endpoints are valid (beta=1 reproduces the
    relit chroma exactly); pipeline configs constrain beta via BlendParams.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    return LabPixel(
        L=alpha * orig.L + (1.0 - alpha) * relit.L,
        a=(1.0 - beta) * orig.a + beta * relit.a,
        b=(1.0 - beta) * orig.b + beta * relit.b,
    )


def _pixels_of(canvas) -> np.ndarray:
    return canvas.pixels if hasattr(canvas, "pixels") else np.asarray(canvas)


def blend_composite(naive, relit, stack: InstanceStack, params: BlendParams,
                    visible=None) -> np.ndarray:
    """Blend per-instance visible pixels in Lab; background copies the relit
    image verbatim. A_min/A_max are this image's visible-area extremes."""
    params.validate()
    naive_px = _pixels_of(naive)
    relit_px = _pixels_of(relit)
    if naive_px.shape != relit_px.shape:
        raise ValueError(f"naive {naive_px.shape} and relit {relit_px.shape} dimensions differ")
    if not len(stack):
        return relit_px.copy()
    if visible is None:
        visible = resolve_visible_masks(stack)
    areas = [v.visible_area_px for v in visible]
    a_min, a_max = min(areas), max(areas)
    alphas = np.array([compute_blend_weight(a, a_min, a_max, params) for a in areas])
    owner = kernels.resolve_owner(
        np.ascontiguousarray(np.stack([v.mask for v in visible]).astype(np.uint8))
    )
    return kernels.blend_images(
        np.ascontiguousarray(naive_px), np.ascontiguousarray(relit_px),
        owner, alphas, params.beta,
    )


class StubRelight:
    """Deterministic offline stand-in for the relighting service.

    Applies a seeded global affine color transform to the composite and
    synthesizes a corner-gradient background outside the foreground mask;
    with identity=True it echoes the composite unchanged.
    """

    name = "stub"

    def __init__(self, seed: int = 0, identity: bool = False):
        self.seed = seed
        self.identity = identity

    def relight(self, request: RelightRequest) -> RelightResponse:
        if self.identity:
            return RelightResponse(image=request.composite.copy())
        rng = np.random.default_rng(derive_seed(self.seed, request.seed or 0))
        gain = rng.uniform(0.8, 1.2, size=3)
        bias = rng.uniform(-20.0, 20.0, size=3)
        out = np.clip(request.composite.astype(np.float64) * gain + bias, 0, 255)
        h, w = request.composite.shape[:2]
        corners = rng.uniform(0, 255, size=(2, 2, 3))
        ty = np.linspace(0.0, 1.0, h)[:, None, None]
        tx = np.linspace(0.0, 1.0, w)[None, :, None]
        top = corners[0, 0] * (1 - tx) + corners[0, 1] * tx
        bottom = corners[1, 0] * (1 - tx) + corners[1, 1] * tx
        background = top * (1 - ty) + bottom * ty
        bg = ~request.foreground_mask
        out[bg] = background[bg]
        return RelightResponse(image=np.floor(out + 0.5).astype(np.uint8))


def _encode_png(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


class HttpRelight:
    """POSTs (composite PNG, mask PNG, prompt) as multipart and expects a
    same-size PNG back."""

    name = "http"

    def __init__(self, endpoint: str, timeout: float = 120.0):
        if not endpoint:
            raise BackendError("http relight backend requires an endpoint")
        self.endpoint = endpoint
        self.timeout = timeout

    def relight(self, request: RelightRequest) -> RelightResponse:
        mask_u8 = (request.foreground_mask.astype(np.uint8)) * 255
        files = {
            "composite": ("composite.png", _encode_png(request.composite), "image/png"),
            "mask": ("mask.png", _encode_png(mask_u8), "image/png"),
        }
        try:
            resp = requests.post(self.endpoint, files=files,
                                 data={"prompt": request.prompt}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"relight endpoint {self.endpoint} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"relight endpoint returned HTTP {resp.status_code}")
        try:
            with Image.open(io.BytesIO(resp.content)) as im:
                image = np.asarray(im.convert("RGB"))
        except OSError as exc:
            raise BackendError(f"relight endpoint returned an undecodable image: {exc}") from exc
        if image.shape[:2] != request.composite.shape[:2]:
            raise BackendError(
                f"relight response dimensions {image.shape[:2]} != request {request.composite.shape[:2]}"
            )
        return RelightResponse(image=image)


def create_relight_backend(kind: str, endpoint: str | None = None, timeout: float = 120.0,
                           seed: int = 0, identity: bool = False):
    if kind == "stub":
        return StubRelight(seed=seed, identity=identity)
    if kind == "http":
        return HttpRelight(endpoint=endpoint or "", timeout=timeout)
    raise BackendError(f"unknown relight backend {kind!r}")
