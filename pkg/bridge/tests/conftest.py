"""Builds tiny local checkpoints so the bridge can be tested offline.

The models are random-weight and word-level but structurally real: a GPT-2
causal LM and a CLAP-style contrastive audio-text model, both saved with
save_pretrained and loaded back through the same Auto* entry points the
bridge uses for full-size checkpoints.
"""

from __future__ import annotations

import numpy as np
import pytest
import torch
from scipy.io import wavfile
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (
    ClapAudioConfig,
    ClapConfig,
    ClapFeatureExtractor,
    ClapModel,
    ClapTextConfig,
    GPT2Config,
    GPT2LMHeadModel,
    PreTrainedTokenizerFast,
)

WORDS = [
    "<pad>", "<unk>", "<bos>",
    "this", "is", "a", "sound", "of",
    "dog", "barking", "rain", "falling", "siren", "wailing",
    "piano", "playing", "loud", "soft", ".",
]


def word_tokenizer() -> PreTrainedTokenizerFast:
    vocab = {w: i for i, w in enumerate(WORDS)}
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="<unk>", pad_token="<pad>", bos_token="<bos>"
    )


@pytest.fixture(scope="session")
def tiny_lm_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_lm")
    tokenizer = word_tokenizer()
    torch.manual_seed(11)
    config = GPT2Config(
        vocab_size=len(WORDS), n_positions=64, n_embd=32, n_layer=2, n_head=2,
        bos_token_id=tokenizer.bos_token_id, eos_token_id=tokenizer.bos_token_id,
    )
    model = GPT2LMHeadModel(config)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return out


@pytest.fixture(scope="session")
def tiny_clap_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_clap")
    tokenizer = word_tokenizer()
    torch.manual_seed(13)
    audio_config = ClapAudioConfig(
        window_size=4, num_mel_bins=16, spec_size=64, patch_size=4, patch_stride=(4, 4),
        hidden_size=32, depths=[1, 1], num_attention_heads=[2, 2],
        projection_dim=16, patch_embeds_hidden_size=16,
    )
    text_config = ClapTextConfig(
        vocab_size=len(WORDS), hidden_size=32, num_hidden_layers=2, num_attention_heads=2,
        intermediate_size=64, max_position_embeddings=66, projection_dim=16,
    )
    model = ClapModel(ClapConfig(text_config=text_config, audio_config=audio_config,
                                 projection_dim=16))
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    extractor = ClapFeatureExtractor(
        feature_size=16, sampling_rate=8000, hop_length=160, max_length_s=2,
        fft_window_size=256, nb_max_samples=16000, truncation="rand_trunc",
    )
    extractor.save_pretrained(out)
    return out


@pytest.fixture(scope="session")
def wav_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("wavs")
    rng = np.random.default_rng(5)
    for name, freq in [("tone_low.wav", 220.0), ("tone_high.wav", 1760.0)]:
        t = np.linspace(0.0, 1.0, 16000, endpoint=False)
        signal = 0.5 * np.sin(2 * np.pi * freq * t) + 0.01 * rng.standard_normal(t.size)
        wavfile.write(out / name, 16000, (signal * 32767).astype(np.int16))
    # stereo file exercises the mono downmix
    stereo = np.stack([np.sin(2 * np.pi * 440 * t), np.sin(2 * np.pi * 660 * t)], axis=1)
    wavfile.write(out / "stereo.wav", 16000, (stereo * 32767).astype(np.int16))
    return out


@pytest.fixture(scope="session")
def bridge(tiny_lm_dir, tiny_clap_dir, wav_dir):
    from capbridge import Bridge, BridgeConfig

    return Bridge(
        BridgeConfig(
            lm_model=str(tiny_lm_dir),
            audio_text_model=str(tiny_clap_dir),
            device="cpu",
            audio_root=wav_dir,
        )
    )
