import json

import pytest

from ragroute.bm25 import DocIndex
from ragroute.rules import load_seed_rules
from ragroute.tables import TableIndex, TableStore

SWAPS_CSV = """\
instrument,year,carrying_amount
interest rate swaps,2019,494
interest rate swaps,2018,512
cross currency swaps,2019,2763
cross currency swaps,2018,2698
equity collars,2019,131
"""

CASE_DOCS = [
    ("doc_interest", "Interest expenses rose during 2019 as floating rates moved "
                     "against the company across its funding programs."),
    ("doc_ccy", "The cross currency swaps hedge foreign denominated debt; the notes "
                "as of December 31, 2019 describe the hedging relationships."),
    ("doc_hedging", "The hedging note explains designation and effectiveness testing "
                    "for interest rate swaps and cross currency swaps."),
]


@pytest.fixture()
def seed_rules():
    return load_seed_rules()


@pytest.fixture()
def case_store(tmp_path):
    table_file = tmp_path / "swaps.csv"
    table_file.write_text(SWAPS_CSV)
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        json.dumps(
            {
                "tables": [
                    {
                        "table_id": "derivative_instruments",
                        "path": "swaps.csv",
                        "description": "Carrying amounts of interest rate swaps and "
                                       "cross currency swaps by year.",
                    }
                ]
            }
        )
    )
    return TableStore.from_manifest(manifest)


@pytest.fixture()
def case_doc_index():
    return DocIndex.build(CASE_DOCS)


@pytest.fixture()
def case_table_index(case_store):
    return TableIndex(case_store)
