"""Multi-modal popularity curve model.

Four modality encoders project visual, textual, numeric, and categorical
inputs to a common width; their concatenation seeds an LSTM whose initial
hidden and cell state are one shared encoding of the fused feature. Each
step s consumes a per-step re-encoding of the fused feature and emits a
non-negative scalar through its own output head, yielding one predicted
popularity score per remaining day.
"""

import json
import struct
import zlib
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, snap_f32
from .errors import CheckpointError, ConfigError, ShapeError, VocabularyError
from .records import Normalizer, TEXT_FIELDS

CHECKPOINT_MAGIC = b"TPMP"
CHECKPOINT_VERSION = 1

UNK = "<unk>"


class Vocabulary:
    """Closed token set with a reserved unknown slot at index 0."""

    def __init__(self, tokens):
        toks = [t for t in tokens if t != UNK]
        if len(set(toks)) != len(toks):
            raise ConfigError("vocabulary tokens must be unique")
        self.tokens = (UNK, *toks)
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @classmethod
    def from_values(cls, values) -> "Vocabulary":
        return cls(sorted(set(values)))

    def index(self, value) -> int:
        return self._index.get(value, 0)

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens


@dataclass(frozen=True)
class ModelConfig:
    text_field_dim: int = 768
    visual_dim: int = 2048
    modality_proj_dim: int = 128
    cat_embed_dim: int = 32
    mlp_hidden: int = 128
    lstm_hidden: int = 256
    lstm_input_dim: int = 128
    cat_vocab_size: int = 16
    lang_vocab_size: int = 11
    per_step_params: bool = True
    ep_mode: bool = True
    steps: int | None = None  # None -> derived from ep_mode; explicit for small-scale checks

    def __post_init__(self):
        dims = (
            self.text_field_dim, self.visual_dim, self.modality_proj_dim,
            self.cat_embed_dim, self.mlp_hidden, self.lstm_hidden,
            self.lstm_input_dim, self.cat_vocab_size, self.lang_vocab_size,
        )
        if any(d < 1 for d in dims):
            raise ConfigError(f"all model dimensions must be >= 1, got {dims}")
        if self.steps is not None and self.steps < 3:
            raise ConfigError(f"steps must be >= 3 for curvature terms, got {self.steps}")

    @property
    def num_steps(self) -> int:
        if self.steps is not None:
            return self.steps
        return 29 if self.ep_mode else 30

    @property
    def first_day(self) -> int:
        return 2 if self.ep_mode else 1

    @property
    def numeric_dim(self) -> int:
        return 7 if self.ep_mode else 6

    @property
    def fused_dim(self) -> int:
        return 4 * self.modality_proj_dim

    def to_json_dict(self) -> dict:
        return {
            "text_field_dim": self.text_field_dim,
            "visual_dim": self.visual_dim,
            "modality_proj_dim": self.modality_proj_dim,
            "cat_embed_dim": self.cat_embed_dim,
            "mlp_hidden": self.mlp_hidden,
            "lstm_hidden": self.lstm_hidden,
            "lstm_input_dim": self.lstm_input_dim,
            "cat_vocab_size": self.cat_vocab_size,
            "lang_vocab_size": self.lang_vocab_size,
            "per_step_params": self.per_step_params,
            "ep_mode": self.ep_mode,
            "steps": self.steps,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**known)


def _mlp_count(din, hidden, dout):
    return din * hidden + hidden + hidden * dout + dout


def param_count(config: ModelConfig) -> int:
    """Closed-form total parameter count for a config."""
    c = config
    h, p = c.mlp_hidden, c.modality_proj_dim
    n_x = c.num_steps if c.per_step_params else 1
    n_out = c.num_steps if c.per_step_params else 1
    return (
        _mlp_count(c.visual_dim, h, p)
        + 5 * 5 + 1  # conv kernel + bias
        + _mlp_count(c.text_field_dim, h, p)
        + _mlp_count(c.numeric_dim, h, p)
        + c.cat_vocab_size * c.cat_embed_dim
        + c.lang_vocab_size * c.cat_embed_dim
        + 2 * _mlp_count(c.cat_embed_dim, h, h)
        + h * p  # bias-free projection after the elementwise product
        + _mlp_count(c.fused_dim, h, c.lstm_hidden)
        + n_x * _mlp_count(c.fused_dim, h, c.lstm_input_dim)
        + c.lstm_input_dim * 4 * c.lstm_hidden
        + c.lstm_hidden * 4 * c.lstm_hidden
        + 4 * c.lstm_hidden
        + n_out * _mlp_count(2 * c.lstm_hidden, h, 1)
    )


def _mlp_specs(prefix, din, hidden, dout):
    return [
        (f"{prefix}.w1", (din, hidden), "weight"),
        (f"{prefix}.b1", (hidden,), "bias"),
        (f"{prefix}.w2", (hidden, dout), "weight"),
        (f"{prefix}.b2", (dout,), "bias"),
    ]


def _step_tags(config: ModelConfig):
    if config.per_step_params:
        return [str(s) for s in range(config.num_steps)]
    return ["shared"]


def _param_specs(config: ModelConfig):
    c = config
    h, p = c.mlp_hidden, c.modality_proj_dim
    specs = []
    specs += _mlp_specs("visual", c.visual_dim, h, p)
    specs += [("text.kernel", (5, 5), "weight"), ("text.kbias", (1,), "bias")]
    specs += _mlp_specs("text", c.text_field_dim, h, p)
    specs += _mlp_specs("numeric", c.numeric_dim, h, p)
    specs += [
        ("cat.embed1", (c.cat_vocab_size, c.cat_embed_dim), "embed"),
        ("cat.embed2", (c.lang_vocab_size, c.cat_embed_dim), "embed"),
    ]
    specs += _mlp_specs("cat.mlp1", c.cat_embed_dim, h, h)
    specs += _mlp_specs("cat.mlp2", c.cat_embed_dim, h, h)
    specs += [("cat.proj", (h, p), "weight")]
    specs += _mlp_specs("state", c.fused_dim, h, c.lstm_hidden)
    specs += [
        ("lstm.wx", (c.lstm_input_dim, 4 * c.lstm_hidden), "weight"),
        ("lstm.wh", (c.lstm_hidden, 4 * c.lstm_hidden), "weight"),
        ("lstm.b", (4 * c.lstm_hidden,), "bias"),
    ]
    for tag in _step_tags(c):
        specs += _mlp_specs(f"xenc.{tag}", c.fused_dim, h, c.lstm_input_dim)
    for tag in _step_tags(c):
        specs += _mlp_specs(f"outhead.{tag}", 2 * c.lstm_hidden, h, 1)
    return specs


@dataclass
class ModelParams:
    tensors: dict[str, Tensor]

    def total(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def zero_grads(self):
        for t in self.tensors.values():
            t.grad = None


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Seeded allocation: uniform fan-in weights, zero biases, N(0, 0.01) embeddings."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape, kind in _param_specs(config):
        if kind == "weight":
            fan_in = shape[0] if name != "text.kernel" else shape[0] * shape[1]
            bound = 1.0 / np.sqrt(fan_in)
            data = rng.uniform(-bound, bound, size=shape)
        elif kind == "embed":
            data = rng.normal(0.0, 0.01, size=shape)
        else:
            data = np.zeros(shape)
        tensors[name] = Tensor(snap_f32(data))
    return ModelParams(tensors)


@dataclass(frozen=True)
class SampleFeatures:
    """Model-ready features for one post.

    ``text_fields`` columns follow the fixed order category, title, tags,
    description, user id. A missing visual embedding is the zero vector.
    """

    sample_id: str
    visual: np.ndarray
    text_fields: np.ndarray
    numeric: np.ndarray
    category_token: int
    language_token: int


@dataclass(frozen=True)
class FeatureBatch:
    ids: tuple[str, ...]
    visual: np.ndarray        # (B, visual_dim)
    text: np.ndarray          # (B, text_field_dim, 5)
    numeric: np.ndarray       # (B, numeric_dim)
    cat_tokens: np.ndarray    # (B,)
    lang_tokens: np.ndarray   # (B,)

    @classmethod
    def from_samples(cls, samples, config: ModelConfig) -> "FeatureBatch":
        if not samples:
            raise ShapeError("cannot build a batch from zero samples")
        visual = np.stack([s.visual for s in samples]).astype(np.float64)
        text = np.stack([s.text_fields for s in samples]).astype(np.float64)
        numeric = np.stack([s.numeric for s in samples]).astype(np.float64)
        if visual.shape[1] != config.visual_dim:
            raise ShapeError(f"visual dim {visual.shape[1]} != configured {config.visual_dim}")
        if text.shape[1:] != (config.text_field_dim, len(TEXT_FIELDS)):
            raise ShapeError(
                f"text fields shaped {text.shape[1:]}, expected "
                f"({config.text_field_dim}, {len(TEXT_FIELDS)})"
            )
        if numeric.shape[1] != config.numeric_dim:
            raise ShapeError(f"numeric dim {numeric.shape[1]} != configured {config.numeric_dim}")
        return cls(
            ids=tuple(s.sample_id for s in samples),
            visual=visual,
            text=text,
            numeric=numeric,
            cat_tokens=np.array([s.category_token for s in samples], dtype=np.int64),
            lang_tokens=np.array([s.language_token for s in samples], dtype=np.int64),
        )

    def __len__(self):
        return len(self.ids)


def _one_hot(tokens, vocab_size, what):
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.min() < 0 or tokens.max() >= vocab_size:
        bad = tokens[(tokens < 0) | (tokens >= vocab_size)][0]
        raise VocabularyError(f"{what} token {bad} outside vocabulary of size {vocab_size}")
    out = np.zeros((tokens.size, vocab_size))
    out[np.arange(tokens.size), tokens] = 1.0
    return Tensor(out)


class Model:
    """Config + parameters + the lookup state needed for inference."""

    def __init__(self, config: ModelConfig, params: ModelParams,
                 cat_vocab: Vocabulary, lang_vocab: Vocabulary,
                 normalizer: Normalizer | None = None):
        if len(cat_vocab) != config.cat_vocab_size:
            raise ConfigError(
                f"category vocabulary size {len(cat_vocab)} != configured {config.cat_vocab_size}"
            )
        if len(lang_vocab) != config.lang_vocab_size:
            raise ConfigError(
                f"language vocabulary size {len(lang_vocab)} != configured {config.lang_vocab_size}"
            )
        expected = [(name, shape) for name, shape, _ in _param_specs(config)]
        actual = [(name, t.shape) for name, t in params.tensors.items()]
        if expected != actual:
            missing = {n for n, _ in expected} - {n for n, _ in actual}
            raise ValueError(
                f"parameter set does not match config (missing or misshaped: "
                f"{sorted(missing) or 'shape order'})"
            )
        self.config = config
        self.params = params
        self.cat_vocab = cat_vocab
        self.lang_vocab = lang_vocab
        self.normalizer = normalizer

    @classmethod
    def initialized(cls, config: ModelConfig, cat_vocab: Vocabulary,
                    lang_vocab: Vocabulary, normalizer: Normalizer | None = None,
                    seed: int = 0) -> "Model":
        config = replace(config, cat_vocab_size=len(cat_vocab), lang_vocab_size=len(lang_vocab))
        return cls(config, init_params(config, seed), cat_vocab, lang_vocab, normalizer)

    # -- modality encoders -------------------------------------------------

    def _mlp(self, x: Tensor, prefix: str) -> Tensor:
        p = self.params.tensors
        hidden = ad.relu(ad.add(ad.matmul(x, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]))
        return ad.add(ad.matmul(hidden, p[f"{prefix}.w2"]), p[f"{prefix}.b2"])

    def encode_visual(self, visual) -> Tensor:
        x = visual if isinstance(visual, Tensor) else Tensor(np.asarray(visual, dtype=np.float64))
        return self._mlp(x, "visual")

    def encode_textual(self, text) -> Tensor:
        """(B, text_field_dim, 5) field matrix -> (B, modality_proj_dim)."""
        x = text if isinstance(text, Tensor) else Tensor(np.asarray(text, dtype=np.float64))
        if x.data.ndim != 3 or x.shape[2] != len(TEXT_FIELDS):
            raise ShapeError(
                f"text batch must be (B, dim, {len(TEXT_FIELDS)}), got {x.shape}"
            )
        p = self.params.tensors
        # pad 2 along the embedding axis only: (dim+4-5+1, 5-5+1) = (dim, 1)
        conv = ad.conv2d_single_channel(x, p["text.kernel"], p["text.kbias"], padding=(2, 0))
        flat = ad.reshape(conv, (x.shape[0], self.config.text_field_dim))
        return self._mlp(ad.relu(flat), "text")

    def encode_numeric(self, numeric) -> Tensor:
        x = numeric if isinstance(numeric, Tensor) else Tensor(np.asarray(numeric, dtype=np.float64))
        return self._mlp(x, "numeric")

    def encode_categorical(self, cat_tokens, lang_tokens) -> Tensor:
        p = self.params.tensors
        e1 = ad.matmul(_one_hot(cat_tokens, self.config.cat_vocab_size, "category"), p["cat.embed1"])
        e2 = ad.matmul(_one_hot(lang_tokens, self.config.lang_vocab_size, "language"), p["cat.embed2"])
        branch1 = self._mlp(e1, "cat.mlp1")
        branch2 = self._mlp(e2, "cat.mlp2")
        # bias-free projection: an all-zero branch annihilates the output exactly
        return ad.matmul(ad.mul(branch1, branch2), p["cat.proj"])

    def fuse(self, f_visual: Tensor, f_textual: Tensor, f_numeric: Tensor,
             f_categorical: Tensor) -> Tensor:
        parts = (f_visual, f_textual, f_numeric, f_categorical)
        for part in parts:
            if part.shape[1] != self.config.modality_proj_dim:
                raise ShapeError(
                    f"modality feature width {part.shape[1]} != {self.config.modality_proj_dim}"
                )
        return ad.concat(parts, axis=1)

    # -- temporal regression ------------------------------------------------

    def _lstm_cell(self, x: Tensor, h: Tensor, c: Tensor):
        p = self.params.tensors
        hid = self.config.lstm_hidden
        gates = ad.add(ad.add(ad.matmul(x, p["lstm.wx"]), ad.matmul(h, p["lstm.wh"])), p["lstm.b"])
        i = ad.sigmoid(ad.narrow(gates, 0, hid))
        f = ad.sigmoid(ad.narrow(gates, hid, 2 * hid))
        g = ad.tanh(ad.narrow(gates, 2 * hid, 3 * hid))
        o = ad.sigmoid(ad.narrow(gates, 3 * hid, 4 * hid))
        c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
        h_next = ad.mul(o, ad.tanh(c_next))
        return h_next, c_next

    def forward(self, batch: FeatureBatch) -> Tensor:
        """Predicted popularity scores, shape (batch, num_steps), all >= 0."""
        fused = self.fuse(
            self.encode_visual(batch.visual),
            self.encode_textual(batch.text),
            self.encode_numeric(batch.numeric),
            self.encode_categorical(batch.cat_tokens, batch.lang_tokens),
        )
        h = self._mlp(fused, "state")
        c = h  # shared state encoder: identical initial hidden and cell values
        outputs = []
        for s in range(self.config.num_steps):
            tag = str(s) if self.config.per_step_params else "shared"
            x_s = self._mlp(fused, f"xenc.{tag}")
            h, c = self._lstm_cell(x_s, h, c)
            head = self._mlp(ad.concat((h, c), axis=1), f"outhead.{tag}")
            outputs.append(ad.relu(head))
        return ad.concat(outputs, axis=1)

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        names = [name for name, _, _ in _param_specs(self.config)]
        payload = b"".join(
            self.params.tensors[n].data.astype("<f4").tobytes() for n in names
        )
        header = {
            "config": self.config.to_json_dict(),
            "cat_vocab": list(self.cat_vocab.tokens),
            "lang_vocab": list(self.lang_vocab.tokens),
            "normalizer": self.normalizer.to_json_dict() if self.normalizer else None,
            "tensors": [[n, list(self.params.tensors[n].shape)] for n in names],
            "crc32": zlib.crc32(payload) & 0xFFFFFFFF,
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            fh.write(payload)

    @classmethod
    def load(cls, path) -> "Model":
        try:
            raw = open(path, "rb").read()
        except OSError as exc:
            raise CheckpointError(f"cannot read checkpoint {path}: {exc}")
        if len(raw) < 16 or raw[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a model checkpoint (bad magic)")
        version = struct.unpack("<I", raw[4:8])[0]
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        hlen = struct.unpack("<Q", raw[8:16])[0]
        try:
            header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}")
        payload = raw[16 + hlen :]
        if zlib.crc32(payload) & 0xFFFFFFFF != header.get("crc32"):
            raise CheckpointError("checkpoint payload fails its checksum")
        config = ModelConfig.from_json_dict(header["config"])
        tensors = {}
        offset = 0
        for name, shape in header["tensors"]:
            shape = tuple(shape)
            nbytes = int(np.prod(shape)) * 4
            chunk = payload[offset : offset + nbytes]
            if len(chunk) != nbytes:
                raise CheckpointError(f"checkpoint truncated inside tensor {name!r}")
            offset += nbytes
            data = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float64)
            tensors[name] = Tensor(data)
        if offset != len(payload):
            raise CheckpointError("checkpoint has trailing bytes after the last tensor")
        normalizer = (
            Normalizer.from_json_dict(header["normalizer"]) if header.get("normalizer") else None
        )
        return cls(
            config,
            ModelParams(tensors),
            Vocabulary(header["cat_vocab"]),
            Vocabulary(header["lang_vocab"]),
            normalizer,
        )
