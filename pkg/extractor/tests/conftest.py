"""Shared fixtures: a tiny randomly-initialized BERT saved to disk, corpus builders.

The encoder is real (transformers BertModel, 2 layers, width 32) but
initialized from a fixed seed and saved with a hand-built WordPiece
tokenizer, so every test runs offline and deterministically. The vocab is
chosen to exercise one-piece words, multi-piece words, punctuation splits,
and unknown words.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
import torch

# WordPiece entries; the normalizer lowercases, so corpus text may be upper case.
VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "attack", "on", "was", "reported", "guerrilla", "forces",
    "in", "two", "monday", "plaza", "army", "and", ".", ",",
    "bomb", "##ing", "##s", "vil", "##lage",
]

# Word pool with known tokenizations: multi-piece, punctuation, unknowns.
KNOWN_WORDS = ("THE", "ATTACK", "ON", "WAS", "REPORTED", "GUERRILLA",
               "FORCES", "IN", "TWO", "MONDAY", "PLAZA", "ARMY", "AND",
               "BOMBING", "VILLAGES", "BOMBINGS")
UNKNOWN_WORDS = ("ZANZIBAR", "QUETZAL", "XYLOPHONE")


def build_tiny_encoder(out_dir: Path) -> str:
    """Save a 2-layer BERT plus working fast tokenizer under out_dir."""
    from tokenizers import Tokenizer, normalizers, pre_tokenizers, processors
    from tokenizers.models import WordPiece
    from transformers import BertConfig, BertModel, BertTokenizerFast

    vocab = {tok: i for i, tok in enumerate(VOCAB)}
    backend = Tokenizer(WordPiece(vocab, unk_token="[UNK]", continuing_subword_prefix="##"))
    backend.normalizer = normalizers.BertNormalizer(lowercase=True)
    backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    backend.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = BertTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]",
    )
    torch.manual_seed(0)
    model = BertModel(BertConfig(
        vocab_size=len(VOCAB), hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=37, max_position_embeddings=64,
    ))
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return str(out_dir)


@pytest.fixture(scope="session")
def tiny_encoder(tmp_path_factory) -> str:
    return build_tiny_encoder(tmp_path_factory.mktemp("enc") / "tiny-bert")


def write_corpus(path: Path, records: list[dict]) -> str:
    path.write_text(json.dumps(records), encoding="utf-8")
    return str(path)


def small_records() -> list[dict]:
    """Three documents covering multi-piece words, punctuation, and unknowns."""
    return [
        {
            "docid": "d00",
            "doctext": "THE BOMBING WAS REPORTED MONDAY. GUERRILLA FORCES ATTACK TWO VILLAGES.",
            "split": "train",
            "templates": [{
                "incident_type": "bombing",
                "PerpInd": [["GUERRILLA FORCES"]],
                "Target": [["TWO VILLAGES"]],
            }],
        },
        {
            "docid": "d01",
            "doctext": "THE ARMY WAS IN THE PLAZA. ZANZIBAR FORCES REPORTED TWO BOMBINGS.",
            "split": "dev",
            "templates": [{
                "incident_type": "attack",
                "PerpInd": [["ZANZIBAR FORCES"]],
            }],
        },
        {
            "docid": "d02",
            "doctext": "TWO ATTACK REPORTS ON MONDAY. THE PLAZA WAS ATTACKED.",
            "split": "test",
            "templates": [],
        },
    ]


def big_records(n_docs: int = 20, seed: int = 7) -> list[dict]:
    """Multi-sentence documents with mixed vocabulary for round-trip checks."""
    rng = random.Random(seed)
    pool = KNOWN_WORDS + UNKNOWN_WORDS
    records = []
    for i in range(n_docs):
        sentences = []
        for _ in range(rng.randint(2, 4)):
            words = [rng.choice(pool) for _ in range(rng.randint(3, 9))]
            words[-1] += "."
            sentences.append(" ".join(words))
        text = " ".join(sentences)
        templates = []
        if i % 3 == 0:
            first = text.split()[0]
            templates.append({"incident_type": "attack", "PerpInd": [[first]]})
        records.append({
            "docid": f"doc{i:02d}",
            "doctext": text,
            "split": ("train", "dev", "test")[i % 3],
            "templates": templates,
        })
    return records
