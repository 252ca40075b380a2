import logging
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ibclab.exceptions import ConfigError
from ibclab.schemas.setting import (
    ComplexRows,
    RelationDocument,
    SettingDocument,
    SpaceDims,
    SpaceWeights,
)
from ibclab.services.ibc_core import Setting, build_setting
from ibclab.services.numkernel import ComplexMatrix, WeightedSpace
from ibclab.services.relations import LinearRelation

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _rows(entries: np.ndarray) -> ComplexRows:
    return [[(float(z.real), float(z.imag)) for z in row] for row in np.asarray(entries, dtype=complex)]


def _array(rows: ComplexRows, shape: Tuple[int, int], label: str) -> np.ndarray:
    array = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex).reshape(-1)
    if array.size != shape[0] * shape[1]:
        raise ConfigError(f"{label} has {array.size} entries, expected shape {shape}")
    return array.reshape(shape)


class SettingCRUD:
    def to_document(self, s: Setting, relations: Optional[Dict[str, LinearRelation]] = None) -> SettingDocument:
        """Serialize a setting and named relations on its boundary space"""
        return SettingDocument(
            dims=SpaceDims(H=s.n, dH=s.n_boundary),
            weights=SpaceWeights(H=[float(w) for w in s.H.weights], dH=[float(w) for w in s.dH.weights]),
            L=_rows(s.L.entries),
            A=_rows(s.A.entries),
            I=_rows(s.I.entries),
            T=_rows(s.T.entries),
            lambda0=float(s.lambda0),
            relations=[
                RelationDocument(name=name, first=_rows(r.first), second=_rows(r.second))
                for name, r in sorted((relations or {}).items())
            ],
        )

    def from_document(self, doc: SettingDocument) -> Tuple[Setting, Dict[str, LinearRelation]]:
        """Rebuild the setting; G0 is recomputed from L and A"""
        n, m = doc.dims.H, doc.dims.dH
        if len(doc.weights.H) != n or len(doc.weights.dH) != m:
            raise ConfigError("weights do not match the declared dimensions")
        H, dH = WeightedSpace(doc.weights.H, "H"), WeightedSpace(doc.weights.dH, "dH")
        s = build_setting(
            ComplexMatrix(_array(doc.L, (n, n), "L"), H, H),
            ComplexMatrix(_array(doc.A, (m, n), "A"), H, dH),
            ComplexMatrix(_array(doc.I, (n, m), "I"), dH, H),
            ComplexMatrix(_array(doc.T, (m, m), "T"), dH, dH),
            doc.lambda0,
        )
        relations = {}
        for entry in doc.relations:
            k = len(entry.first[0]) if entry.first else 0
            relations[entry.name] = LinearRelation.from_pairs(
                _array(entry.first, (m, k), f"{entry.name}.first"),
                _array(entry.second, (m, k), f"{entry.name}.second"),
                s.dH,
            )
        return s, relations

    def save(self, s: Setting, path: PathLike, relations: Optional[Dict[str, LinearRelation]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_document(s, relations).model_dump_json(indent=2))
        logger.info("Saved setting n=%d n_boundary=%d to %s", s.n, s.n_boundary, path)
        return path

    def load(self, path: PathLike) -> Setting:
        return self.load_with_relations(path)[0]

    def load_with_relations(self, path: PathLike) -> Tuple[Setting, Dict[str, LinearRelation]]:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"setting file {path} does not exist")
        try:
            doc = SettingDocument.model_validate_json(path.read_text())
        except ValueError as exc:
            raise ConfigError(f"setting file {path} is invalid: {exc}") from exc
        return self.from_document(doc)


setting_crud = SettingCRUD()
