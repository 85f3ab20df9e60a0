import hashlib
import json
import logging
import sqlite3
from datetime import datetime
from pathlib import Path
from typing import Callable, Mapping, Optional, Union

from src.equilibrium import ReferencePoint
from src.settings import CONFIG

logger = logging.getLogger(__name__)

CACHE_FILE = CONFIG["output"]["cache_file"]


def fingerprint(key: Mapping[str, object]) -> str:
    """SHA-256 of the canonical JSON of the reference inputs"""
    canonical = json.dumps(key, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ReferenceCache:
    """Reference equilibria stored per scenario fingerprint"""

    def __init__(self, path: Union[str, Path], log_callback: Optional[Callable[[str], None]] = None):
        self.path = Path(path)
        self.log_callback = log_callback or logger.info
        self.init_db()

    def init_db(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with sqlite3.connect(self.path) as conn:
            c = conn.cursor()
            c.execute('''CREATE TABLE IF NOT EXISTS reference_points (
                fingerprint TEXT PRIMARY KEY,
                game TEXT,
                x_star TEXT,
                y_star TEXT,
                residual REAL,
                iterations_used INTEGER,
                step REAL,
                tol REAL,
                solved_at TEXT
            )''')
            conn.commit()

    def load(self, key: Mapping[str, object], tol: float) -> Optional[ReferencePoint]:
        """Cached point for this key, provided its residual meets tol"""
        with sqlite3.connect(self.path) as conn:
            c = conn.cursor()
            c.execute('SELECT x_star, y_star, residual, iterations_used, step, tol '
                      'FROM reference_points WHERE fingerprint = ?', (fingerprint(key),))
            row = c.fetchone()
        if row is None:
            return None
        point = ReferencePoint.from_dict({
            "x_star": json.loads(row[0]),
            "y_star": json.loads(row[1]),
            "residual": row[2],
            "iterations_used": row[3],
            "step": row[4],
            "tol": row[5],
        })
        if point.residual > tol:
            self.log_callback(f"⚠️ Cached reference has residual {point.residual:.2e} > {tol:.1e}, re-solving")
            return None
        self.log_callback(f"✅ Reference loaded from cache (residual {point.residual:.2e})")
        return point

    def store(self, key: Mapping[str, object], point: ReferencePoint):
        data = point.to_dict()
        game = key.get("game", {})
        name = game.get("kind", "custom") if isinstance(game, Mapping) else "custom"
        with sqlite3.connect(self.path) as conn:
            c = conn.cursor()
            c.execute('INSERT OR REPLACE INTO reference_points '
                      '(fingerprint, game, x_star, y_star, residual, iterations_used, step, tol, solved_at) '
                      'VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)',
                      (fingerprint(key), name, json.dumps(data["x_star"]), json.dumps(data["y_star"]),
                       data["residual"], data["iterations_used"], data["step"], data["tol"],
                       datetime.now().isoformat()))
            conn.commit()
        self.log_callback(f"💾 Reference stored in {self.path.name}")

    def delete(self, key: Mapping[str, object]):
        with sqlite3.connect(self.path) as conn:
            c = conn.cursor()
            c.execute("DELETE FROM reference_points WHERE fingerprint = ?", (fingerprint(key),))
            conn.commit()
