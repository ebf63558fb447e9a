import numpy as np
import pytest
from fastapi.testclient import TestClient

from embedder.encoders import StubEncoder, encode_text
from embedder.service import create_app


@pytest.fixture
def client():
    return TestClient(create_app(StubEncoder(dim=8), max_batch=4))


class TestInfo:
    def test_static_metadata(self, client):
        resp = client.get("/info")
        assert resp.status_code == 200
        assert resp.json() == {"dim": 8, "model": "stub-encoder"}


class TestEmbed:
    def test_two_texts(self, client):
        resp = client.post("/embed", json={"texts": ["a", "b"]})
        assert resp.status_code == 200
        body = resp.json()
        assert body["dim"] == 8
        assert len(body["vectors"]) == 2
        assert all(len(v) == 8 for v in body["vectors"])

    def test_empty_batch_400(self, client):
        resp = client.post("/embed", json={"texts": []})
        assert resp.status_code == 400
        assert "empty" in resp.json()["error"]

    def test_oversize_batch_413_declares_limit(self, client):
        resp = client.post("/embed", json={"texts": ["x"] * 5})
        assert resp.status_code == 413
        assert resp.json()["max_batch"] == 4

    def test_malformed_body_400(self, client):
        resp = client.post("/embed", json={"nope": 1})
        assert resp.status_code == 422  # fastapi validation error

    def test_order_preserved(self, client):
        texts = ["alpha", "beta", "gamma"]
        resp = client.post("/embed", json={"texts": texts})
        enc = StubEncoder(dim=8)
        expected = [encode_text(enc, t)[0] for t in texts]
        for got, want in zip(resp.json()["vectors"], expected):
            assert np.allclose(got, want)

    def test_same_text_bitwise_stable(self, client):
        a = client.post("/embed", json={"texts": ["repeat"]}).json()["vectors"][0]
        b = client.post("/embed", json={"texts": ["repeat"]}).json()["vectors"][0]
        assert a == b
