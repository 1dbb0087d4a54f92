import csv
import json
from pathlib import Path
from typing import Dict, List, Sequence

DATASET_HEADER = ["record_id", "item_type"]


class DatasetParseException(ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def ensure_path_for_file_exists(file_path):
    Path(file_path).parent.mkdir(parents=True, exist_ok=True)


def write_pretty_json_asset(json_data: Dict, asset_path: str):
    with open(asset_path, "w") as file:
        json.dump(json_data, file, indent=4)


def load_json_asset(asset_path: str):
    with open(asset_path, "r") as file:
        return json.load(file)


def write_dataset_csv(types: Sequence[int], file_path: str):
    """Writes `record_id,item_type` rows with ids 0..n-1"""
    ensure_path_for_file_exists(file_path)
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        writer.writerows([[i, int(t)] for i, t in enumerate(types)])


def read_dataset_csv(file_path: str) -> List[List[int]]:
    """Reads `record_id,item_type` rows, returns [record_id, item_type] pairs

    Will raise `DatasetParseException` naming the offending line.
    """
    with open(file_path, newline="") as f:
        reader = csv.reader(f)
        rows = []
        seen_ids = set()
        for line in reader:
            line_number = reader.line_num
            if not line:
                continue
            if line_number == 1 and [cell.strip() for cell in line] == DATASET_HEADER:
                continue
            if len(line) != 2:
                raise DatasetParseException(
                    line_number, f"expected 2 columns, got {len(line)}"
                )
            try:
                record_id, item_type = int(line[0]), int(line[1])
            except ValueError as e:
                raise DatasetParseException(line_number, "non-integer value") from e
            if record_id < 0 or item_type < 1:
                raise DatasetParseException(
                    line_number, "record_id must be >= 0 and item_type >= 1"
                )
            if record_id in seen_ids:
                raise DatasetParseException(line_number, f"duplicate record_id {record_id}")
            seen_ids.add(record_id)
            rows.append([record_id, item_type])
        return rows
