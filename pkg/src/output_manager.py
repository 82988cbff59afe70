"""Output manager for saving experiment runs."""

import json
import os
import secrets
import string
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

from .metrics.export import write_csv

OUTPUT_DIR_ENV = "DAGDELAY_OUTPUT_DIR"


class OutputManager:
    """Manages run folders: latency CSV, summary text and metadata."""

    FILE_MAP = {
        "csv": "latency.csv",
        "summary": "summary.txt",
        "metadata": "metadata.json",
    }

    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = Path(base_dir or os.environ.get(OUTPUT_DIR_ENV, "outputs"))
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def _generate_id(self, length: int = 6) -> str:
        """Generate a random alphanumeric ID."""
        chars = string.ascii_lowercase + string.digits
        return ''.join(secrets.choice(chars) for _ in range(length))

    def create_output_folder(self, label: str) -> Path:
        """Create uniquely-named folder for a new run.

        Args:
            label: Scenario or sweep label (e.g., "shoalpp")

        Returns:
            Path to the created folder
        """
        timestamp = datetime.now().strftime("%Y-%m-%d_%H%M%S")
        unique_id = self._generate_id()
        safe_label = "".join(c if c.isalnum() or c in "-=," else "-" for c in label) or "run"
        folder = self.base_dir / f"{timestamp}_{unique_id}_{safe_label}"
        folder.mkdir(exist_ok=True)
        return folder

    def save_csv(self, folder: Path, rows: Iterable[list[str]]) -> Path:
        return write_csv(folder / self.FILE_MAP["csv"], rows)

    def save_summary(self, folder: Path, text: str) -> Path:
        file_path = folder / self.FILE_MAP["summary"]
        file_path.write_text(text.rstrip("\n") + "\n")
        return file_path

    def save_metadata(
        self,
        folder: Path,
        settings: dict,
        label: str = "",
        seeds: Optional[list[int]] = None,
        oracles_passed: Optional[bool] = None,
    ) -> Path:
        """Save scenario echo and run info as JSON.

        Args:
            folder: Output folder path
            settings: Scenario settings per run label
            label: Scenario or sweep label
            seeds: Seeds that were run
            oracles_passed: Overall oracle verdict

        Returns:
            Path to saved metadata file
        """
        metadata = {
            "timestamp": datetime.now().isoformat(),
            "label": label,
            "seeds": seeds or [],
            "oracles_passed": oracles_passed,
            "settings": settings,
        }

        file_path = folder / self.FILE_MAP["metadata"]
        with open(file_path, "w") as f:
            json.dump(metadata, f, indent=2)
        return file_path

    def get_all_outputs(self) -> list[dict]:
        """Run folders that carry metadata, newest first."""
        outputs = []
        for folder in sorted(self.base_dir.iterdir(), key=lambda p: p.name, reverse=True):
            metadata_path = folder / self.FILE_MAP["metadata"]
            if not folder.is_dir() or not metadata_path.exists():
                continue
            try:
                metadata = json.loads(metadata_path.read_text())
            except (json.JSONDecodeError, OSError):
                metadata = {}

            # <date>_<time>_<id>_<label>; labels may contain underscores
            parts = folder.name.split("_", 3)
            if len(parts) == 4:
                date_str, time_str, unique_id, label = parts
            else:
                date_str, time_str, unique_id, label = "", "", "", folder.name
            outputs.append({
                "folder": folder,
                "date": date_str,
                "time": time_str,
                "id": unique_id,
                "label": label,
                "metadata": metadata,
            })
        return outputs
