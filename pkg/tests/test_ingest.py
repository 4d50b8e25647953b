from pathlib import Path

import pytest

from evmarket.domain import TaskType
from evmarket.ingest import TASK_COLUMNS, WORKER_COLUMNS, IngestError, ingest_tasks, ingest_workers

DATA = Path(__file__).resolve().parents[1] / "data"
WHEAD = ",".join(WORKER_COLUMNS) + "\n"
THEAD = ",".join(TASK_COLUMNS) + "\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_header_only_is_empty(tmp_path):
    assert ingest_workers(write(tmp_path, "w.csv", WHEAD)) == []
    assert ingest_tasks(write(tmp_path, "t.csv", THEAD)) == []


def test_negative_efficiency_names_row(tmp_path):
    p = write(tmp_path, "w.csv", WHEAD + "1,0,0,0.2,100,10\n2,1,1,-0.2,100,10\n")
    with pytest.raises(IngestError, match="row 3") as exc:
        ingest_workers(p)
    assert exc.value.row == 3 and "energy_per_km" in str(exc.value)


def test_bundled_fleet_has_54_workers():
    ws = ingest_workers(DATA / "workers_54.csv")
    assert len(ws) == 54 and len({w.id for w in ws}) == 54


def test_bundled_tasks_parse():
    ts = ingest_tasks(DATA / "tasks_8rounds.csv")
    assert ts and {t.slot_created for t in ts} == set(range(8))
    assert all(t.origin == t.destination for t in ts if t.z is TaskType.V2G)


@pytest.mark.parametrize("body,needle", [
    ("1,0,0,0.2,100,10\n1,1,1,0.2,100,10\n", "duplicate id 1"),
    ("1,0,0,0.2,abc,10\n", "range_km"),
    ("1,0,0,0.2,100\n", "expected 6 fields"),
    ("1,0,0,0.2,100,nan\n", "finite"),
])
def test_worker_errors(tmp_path, body, needle):
    with pytest.raises(IngestError, match=needle):
        ingest_workers(write(tmp_path, "w.csv", WHEAD + body))


@pytest.mark.parametrize("body,needle", [
    ("1,5,0,0,1,1,0,0\n", "type must be"),
    ("1,2,0,0,1,1,3.0,0\n", "row 2"),  # V2G task that moves
    ("1,0,0,0,1,1,0,-1\n", "slot"),
])
def test_task_errors(tmp_path, body, needle):
    with pytest.raises(IngestError, match=needle):
        ingest_tasks(write(tmp_path, "t.csv", THEAD + body))


def test_wrong_header(tmp_path):
    with pytest.raises(IngestError, match="expected header"):
        ingest_workers(write(tmp_path, "w.csv", "a,b,c\n"))


def test_latlon_projected_around_centroid(tmp_path):
    p = write(tmp_path, "w.csv", "id,lat,lon,energy_per_km,range_km,min_range_km\n"
                                 "1,40.70,-74.00,0.2,100,10\n2,40.80,-74.00,0.2,100,10\n")
    a, b = ingest_workers(p)
    assert a.location[0] == pytest.approx(0.0, abs=1e-9)
    assert a.location[1] == pytest.approx(-b.location[1])
    assert b.location[1] - a.location[1] == pytest.approx(11.12, abs=0.05)


def test_blank_lines_skipped_and_rows_numbered(tmp_path):
    p = write(tmp_path, "t.csv", THEAD + "\n1,0,0,0,1,1,0,0\n\n2,9,0,0,1,1,0,0\n")
    with pytest.raises(IngestError) as exc:
        ingest_tasks(p)
    assert exc.value.row == 5
