from __future__ import annotations

import io
import json
from pathlib import Path

import pytest

from incidentkg.corpus import IncidentSet, load_incidents

FIXTURES = Path(__file__).parent / "fixtures"

# The corpus spec behind tests/fixtures/toy_embeddings.txt. Tests that pair
# the fixture with a generated corpus must use exactly these knobs.
CLUSTER_SPEC_KWARGS = dict(
    seed=7, n_incidents=320, n_entity_types=104, n_pairs=40, n_clusters=8
)


def incidents_from_records(records: list[dict]) -> IncidentSet:
    payload = "".join(json.dumps(r) + "\n" for r in records).encode("utf-8")
    return load_incidents(io.BytesIO(payload), "jsonl", source="<test>")


@pytest.fixture
def tiny_incidents() -> IncidentSet:
    return incidents_from_records(
        [
            {
                "id": "I1",
                "title": "Unable to delete Vnet",
                "description": "VNet Id: abc-123 Gateway Id: gw-9. Ping failed.",
            },
            {
                "id": "I2",
                "title": "Gateway down",
                "description": "Encap Type = VXLAN. ping 10.0.0.1 failed",
            },
        ]
    )
