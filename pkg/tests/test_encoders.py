"""Encoder client tests: hash-encoder determinism and HTTP transport behavior."""

import base64
import json

import httpx
import numpy as np
import pytest

from graphtriage.encoders import (
    HashEncoderClient,
    HttpEncoderClient,
    encode_query,
    make_encoder,
)
from graphtriage.errors import DimensionMismatch, EncoderUnavailable
from graphtriage.vectors import QueryInput, cosine


def test_hash_encoder_deterministic():
    a = HashEncoderClient(seed=42, dimension=16)
    b = HashEncoderClient(seed=42, dimension=16)
    np.testing.assert_array_equal(a.encode_text("eczema"), b.encode_text("eczema"))
    np.testing.assert_array_equal(a.encode_text("eczema"), a.encode_text("eczema"))


def test_hash_encoder_distinct_texts_differ():
    enc = HashEncoderClient(seed=42, dimension=16)
    sim = cosine(enc.encode_text("eczema"), enc.encode_text("psoriasis"))
    assert sim < 1.0


def test_hash_encoder_dimension_echo():
    assert HashEncoderClient(seed=1, dimension=24).dimension() == 24


def test_hash_encoder_rejects_tiny_dimension():
    with pytest.raises(ValueError):
        HashEncoderClient(seed=1, dimension=1)


def test_hash_encoder_outputs_unit_norm_float32():
    enc = HashEncoderClient(seed=3, dimension=12)
    for vec in (enc.encode_text("itchy rash"), enc.encode_text(""),
                enc.encode_multimodal("rash", "img/a.jpg"),
                enc.encode_multimodal("", "img/a.jpg")):
        assert vec.dtype == np.float32
        assert abs(float(np.linalg.norm(vec.astype(np.float64))) - 1.0) <= 1e-6


def test_hash_encoder_image_changes_encoding():
    enc = HashEncoderClient(seed=3, dimension=16)
    with_a = enc.encode_multimodal("red patches", "img/a.jpg")
    with_b = enc.encode_multimodal("red patches", "img/b.jpg")
    text_only = enc.encode_text("red patches")
    assert cosine(with_a, with_b) < 1.0
    assert cosine(with_a, text_only) < 1.0


def test_seed_changes_encoding():
    a = HashEncoderClient(seed=1, dimension=16)
    b = HashEncoderClient(seed=2, dimension=16)
    assert cosine(a.encode_text("eczema"), b.encode_text("eczema")) < 1.0


def test_encode_query_with_and_without_image():
    enc = HashEncoderClient(seed=5, dimension=16)
    plain = encode_query(enc, QueryInput(text="dry skin"))
    assert plain.mm_vec is None
    with_image = encode_query(enc, QueryInput(text="dry skin", image_ref="x.jpg"))
    assert with_image.mm_vec is not None
    np.testing.assert_array_equal(plain.text_vec, with_image.text_vec)


def test_make_encoder_parsing():
    enc = make_encoder("test:9", dimension=8)
    assert isinstance(enc, HashEncoderClient)
    assert isinstance(make_encoder("http://enc.local", dimension=8),
                      HttpEncoderClient)
    with pytest.raises(ValueError):
        make_encoder("ftp://nope", dimension=8)


def _unit_vector(dim):
    v = np.zeros(dim)
    v[0] = 1.0
    return v.tolist()


def test_http_encoder_roundtrip_and_b64_passthrough():
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content)
        seen.update(payload)
        return httpx.Response(200, json={"vector": _unit_vector(4)})

    client = HttpEncoderClient("http://enc.local", dimension=4,
                               transport=httpx.MockTransport(handler))
    vec = client.encode_multimodal("rash", "b64:QUJD")
    assert vec.shape == (4,)
    assert seen["text"] == "rash"
    assert seen["image_base64"] == "QUJD"


def test_http_encoder_reads_image_paths(tmp_path):
    image = tmp_path / "photo.jpg"
    image.write_bytes(b"JPEGDATA")

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content)
        assert base64.b64decode(payload["image_base64"]) == b"JPEGDATA"
        return httpx.Response(200, json={"vector": _unit_vector(4)})

    client = HttpEncoderClient("http://enc.local", dimension=4,
                               transport=httpx.MockTransport(handler))
    client.encode_multimodal("rash", str(image))

    with pytest.raises(EncoderUnavailable):
        client.encode_multimodal("rash", str(tmp_path / "missing.jpg"))


def test_http_encoder_retries_503_then_succeeds():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        if calls["n"] <= 2:
            return httpx.Response(503)
        return httpx.Response(200, json={"vector": _unit_vector(4)})

    client = HttpEncoderClient("http://enc.local", dimension=4, backoff=0.0,
                               transport=httpx.MockTransport(handler))
    assert client.encode_text("hello").shape == (4,)
    assert calls["n"] == 3


def test_http_encoder_unavailable_after_retries():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503)

    client = HttpEncoderClient("http://enc.local", dimension=4, backoff=0.0,
                               transport=httpx.MockTransport(handler))
    with pytest.raises(EncoderUnavailable):
        client.encode_text("hello")


def test_http_encoder_rejects_wrong_dimension():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"vector": _unit_vector(6)})

    client = HttpEncoderClient("http://enc.local", dimension=4, backoff=0.0,
                               transport=httpx.MockTransport(handler))
    with pytest.raises(DimensionMismatch):
        client.encode_text("hello")
