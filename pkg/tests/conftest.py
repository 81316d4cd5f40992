"""Shared fixtures: deterministic encoder, fixture graphs, scripted routers."""

from __future__ import annotations

import os

import pytest

from graphtriage import kernels
from graphtriage.encoders import HashEncoderClient
from graphtriage.graph import ConditionRecord, EdgePolicy, ingest, read_records_csv
from graphtriage.llm import AgentRole, AgentRouter, ScriptedBackend, ScriptRule

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "goldens")

FIXTURE_SEED = 7
FIXTURE_DIM = 32


def data_path(*parts: str) -> str:
    return os.path.join(DATA_DIR, *parts)


def golden_path(name: str) -> str:
    return os.path.join(GOLDEN_DIR, name)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    kernels.warmup()


@pytest.fixture(scope="session")
def encoder():
    return HashEncoderClient(seed=FIXTURE_SEED, dimension=FIXTURE_DIM)


def make_records(specs):
    """specs: iterable of (name, definition) or (name, definition, image_paths)."""
    records = []
    for spec in specs:
        name, definition = spec[0], spec[1]
        images = list(spec[2]) if len(spec) > 2 else []
        records.append(ConditionRecord(
            name=name, definition=definition,
            symptoms=f"Typical signs of {name.lower()}.",
            clinical_treatment=f"Clinic care for {name.lower()}.",
            home_treatment=f"Home care for {name.lower()}.",
            prevention=f"How to avoid {name.lower()}.",
            image_paths=images,
        ))
    return records


@pytest.fixture(scope="session")
def fixture_graph(encoder):
    """The committed 10-condition fixture graph (edges at threshold 0.8)."""
    records = read_records_csv(data_path("conditions_10.csv"))
    return ingest(records, encoder, EdgePolicy(threshold=0.8))


@pytest.fixture()
def scripted_router():
    """Catch-all scripted router good enough for any full pipeline run."""
    backend = ScriptedBackend([
        ScriptRule(contains="", role=AgentRole.QUESTION,
                   response='["Is the area itchy?", "Any fever?", '
                            '"How long has it lasted?"]'),
        ScriptRule(contains="", role=AgentRole.REASONING,
                   response='{"likelihood": 80}'),
        ScriptRule(contains="Patient's new message:", role=AgentRole.INTERACTION,
                   response="Scripted follow-up reply."),
        ScriptRule(contains="", role=AgentRole.INTERACTION,
                   response="Scripted final answer."),
    ])
    return AgentRouter.scripted(backend), backend
