"""Model wrappers: a causal LM and a contrastive audio-text encoder.

Both wrappers run in eval mode under ``torch.inference_mode`` and are
deterministic: identical requests within one server process return
bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy.io import wavfile
from scipy.signal import resample_poly
from transformers import (
    AutoModel,
    AutoModelForCausalLM,
    AutoTokenizer,
    ClapFeatureExtractor,
)


@dataclass
class BridgeConfig:
    """Checkpoints and serving options.

    ``lm_model`` and ``audio_text_model`` accept hub ids or local paths. The
    defaults name a 1.3B decoder-only LM and a contrastive audio-text
    checkpoint; tests point them at tiny locally-saved models instead.
    """

    lm_model: str = "facebook/opt-1.3b"
    audio_text_model: str = "laion/clap-htsat-unfused"
    device: str = "cpu"
    audio_root: Path = field(default_factory=Path.cwd)
    add_bos: bool = True


class CausalLM:
    """tokenize / detokenize / next-token distribution over a causal LM."""

    def __init__(self, model_id: str, device: str = "cpu", add_bos: bool = True):
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id).to(device).eval()
        self.device = device
        self.add_bos = add_bos and self.tokenizer.bos_token_id is not None

    @property
    def vocab_size(self) -> int:
        return int(self.model.config.vocab_size)

    def tokenize(self, text: str) -> list[int]:
        return [int(t) for t in self.tokenizer.encode(text, add_special_tokens=False)]

    def detokenize(self, tokens: list[int]) -> str:
        for t in tokens:
            if not 0 <= t < self.vocab_size:
                raise ValueError(f"token id {t} out of range [0, {self.vocab_size})")
        return self.tokenizer.decode(tokens, clean_up_tokenization_spaces=False)

    def next_token_distribution(self, tokens: list[int]) -> np.ndarray:
        context = list(tokens)
        if self.add_bos:
            context = [int(self.tokenizer.bos_token_id)] + context
        if not context:
            raise ValueError("empty context and the tokenizer has no BOS token")
        for t in context:
            if not 0 <= t < self.vocab_size:
                raise ValueError(f"token id {t} out of range [0, {self.vocab_size})")
        input_ids = torch.tensor([context], dtype=torch.long, device=self.device)
        with torch.inference_mode():
            logits = self.model(input_ids=input_ids).logits[0, -1].to(torch.float64)
            probs = torch.softmax(logits, dim=-1)
        return probs.cpu().numpy()


def load_waveform(path: Path, target_rate: int, max_samples: int) -> np.ndarray:
    """Read a WAV file as mono float32 at the target rate.

    Integer PCM is scaled into [-1, 1]; longer clips are truncated to
    ``max_samples`` deterministically (head of the clip) so that downstream
    feature extraction never has to make a random truncation choice.
    """
    rate, data = wavfile.read(path)
    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        data = data.astype(np.float64) / max(abs(info.min), info.max)
    else:
        data = data.astype(np.float64)
    if rate != target_rate:
        data = resample_poly(data, target_rate, rate)
    if data.size > max_samples:
        data = data[:max_samples]
    return data.astype(np.float32)


def _pooled(output) -> torch.Tensor:
    # transformers returns either a tensor or an output object, depending on
    # the library version
    if isinstance(output, torch.Tensor):
        return output
    return output.pooler_output


class AudioTextEncoder:
    """Contrastive text/audio embeddings from a CLAP-style checkpoint.

    Embeddings are L2-normalized before leaving the server: cosine results
    are unchanged and float32 payload magnitudes stay bounded.
    """

    def __init__(self, model_id: str, device: str = "cpu", audio_root: Path | None = None):
        self.model = AutoModel.from_pretrained(model_id).to(device).eval()
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.feature_extractor = ClapFeatureExtractor.from_pretrained(model_id)
        self.device = device
        self.audio_root = Path(audio_root) if audio_root is not None else Path.cwd()

    @property
    def embedding_dim(self) -> int:
        return int(self.model.config.projection_dim)

    @staticmethod
    def _normalized(features: torch.Tensor) -> np.ndarray:
        features = features.to(torch.float64)
        features = features / features.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        return features.cpu().numpy()

    def encode_text_batch(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            return []
        encoded = self.tokenizer(
            list(texts), padding=True, truncation=True, return_tensors="pt"
        ).to(self.device)
        with torch.inference_mode():
            features = _pooled(self.model.get_text_features(**encoded))
        matrix = self._normalized(features)
        return [matrix[i] for i in range(matrix.shape[0])]

    def encode_audio(self, ref: str) -> np.ndarray:
        path = Path(ref)
        if not path.is_absolute():
            path = self.audio_root / path
        extractor = self.feature_extractor
        max_samples = int(extractor.nb_max_samples)
        waveform = load_waveform(path, int(extractor.sampling_rate), max_samples)
        features = extractor(
            waveform, sampling_rate=int(extractor.sampling_rate), return_tensors="pt"
        ).to(self.device)
        with torch.inference_mode():
            embedded = _pooled(self.model.get_audio_features(**features))
        return self._normalized(embedded)[0]
