"""Command-line behavior: flags, manifest fields, exit codes."""

import pytest
from conftest import small_records, write_corpus

from docprobe import read_bundle
from docprobe_extract.cli import _parse_layers, main


def test_layers_argument_forms():
    assert _parse_layers("all") == "all"
    assert _parse_layers("0,3,12") == (0, 3, 12)
    with pytest.raises(Exception, match="comma-separated"):
        _parse_layers("0;3")


def test_cli_fulltext(tiny_encoder, tmp_path):
    corpus = write_corpus(tmp_path / "c.json", small_records())
    out = tmp_path / "bundle"
    rc = main([
        "--corpus", corpus, "--encoder", tiny_encoder, "--mode", "fulltext",
        "--layers", "0,2", "--max-tokens", "48", "--out", str(out), "--verify",
    ])
    assert rc == 0
    manifest, reader = read_bundle(out)
    assert manifest.mode == "FullText"
    assert manifest.max_tokens == 48
    assert manifest.layer_ids == (0, 2)
    assert set(reader.doc_ids) == {"d00", "d01", "d02"}


def test_cli_sentcat_defaults(tiny_encoder, tmp_path, capsys):
    corpus = write_corpus(tmp_path / "c.json", small_records())
    out = tmp_path / "bundle"
    rc = main([
        "--corpus", corpus, "--encoder", tiny_encoder, "--mode", "sentcat",
        "--max-tokens", "64", "--out", str(out), "--verify",
    ])
    assert rc == 0
    manifest, _ = read_bundle(out)
    assert manifest.mode == "SentCat"
    assert manifest.layer_ids == (0, 1, 2)
    assert "0 violations" in capsys.readouterr().out


def test_cli_bad_encoder_exits_one(tmp_path, capsys):
    corpus = write_corpus(tmp_path / "c.json", small_records())
    rc = main([
        "--corpus", corpus, "--encoder", str(tmp_path / "missing"),
        "--mode", "fulltext", "--out", str(tmp_path / "bundle"),
    ])
    assert rc == 1
    assert "error: EncoderLoadError" in capsys.readouterr().err


def test_cli_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["--mode", "fulltext"])
    assert exc.value.code == 2
