"""Sparse longitudinal cohort data.

A cohort is a set of subjects, each with a disease index, a diagnosis label
and a list of visits (months since baseline). Measurements are stored in
long format, one entry per available (subject, visit, biomarker) triple; a
missing measurement is simply absent.
"""

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

from .constants import MONTHS_PER_YEAR
from .exceptions import DataError, UnknownBiomarkerError, UnknownDiseaseError


@dataclass(frozen=True, eq=False)
class CohortDataset:
    """Measurement set Ω with subject and visit metadata.

    Attributes
    ----------
        subject_ids: identifier per subject.
        disease: disease index d_i per subject, into `diseases`.
        diagnosis: diagnosis label per subject.
        visit_months: months since baseline m_ij, one array per subject.
        subject, visit, biomarker: integer keys (i, j, k) per measurement.
        value: y_ijk per measurement.
        biomarkers: biomarker names, indexed by k.
        diseases: disease labels, indexed by d.

    """

    subject_ids: tuple[str, ...]
    disease: np.ndarray
    diagnosis: tuple[str, ...]
    visit_months: tuple[np.ndarray, ...]
    subject: np.ndarray
    visit: np.ndarray
    biomarker: np.ndarray
    value: np.ndarray
    biomarkers: tuple[str, ...]
    diseases: tuple[str, ...]

    def __post_init__(self) -> None:
        n_subjects = len(self.subject_ids)
        for name in ("disease", "subject", "visit", "biomarker"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "value", np.asarray(self.value, dtype=float))
        object.__setattr__(
            self,
            "visit_months",
            tuple(np.asarray(m, dtype=float) for m in self.visit_months),
        )

        if len(self.disease) != n_subjects or len(self.diagnosis) != n_subjects:
            msg = "disease and diagnosis must have one entry per subject."
            raise DataError(msg)
        if len(self.visit_months) != n_subjects:
            msg = "visit_months must have one entry per subject."
            raise DataError(msg)
        if len(set(self.subject_ids)) != n_subjects:
            msg = "subject ids must be unique."
            raise DataError(msg)
        n = len(self.value)
        if not len(self.subject) == len(self.visit) == len(self.biomarker) == n:
            msg = "subject, visit, biomarker and value must have equal lengths."
            raise DataError(msg)
        if n_subjects and (self.disease.min(initial=0) < 0 or self.disease.max(initial=0) >= len(self.diseases)):
            msg = f"disease indices must lie in [0, {len(self.diseases)})."
            raise DataError(msg)
        if n == 0:
            return
        if self.subject.min() < 0 or self.subject.max() >= n_subjects:
            msg = "measurement references an unknown subject."
            raise DataError(msg)
        if self.biomarker.min() < 0 or self.biomarker.max() >= len(self.biomarkers):
            msg = "measurement references an unknown biomarker."
            raise DataError(msg)
        n_visits = np.array([len(m) for m in self.visit_months])
        if self.visit.min() < 0 or np.any(self.visit >= n_visits[self.subject]):
            msg = "measurement references an unknown visit."
            raise DataError(msg)
        keys = (self.subject * int(n_visits.max()) + self.visit) * len(self.biomarkers) + self.biomarker
        if len(np.unique(keys)) != n:
            msg = "duplicate (subject, visit, biomarker) measurements."
            raise DataError(msg)

    def __len__(self) -> int:
        return len(self.value)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_biomarkers(self) -> int:
        return len(self.biomarkers)

    @cached_property
    def months(self) -> np.ndarray:
        """Months since baseline per measurement."""
        if not len(self):
            return np.zeros(0)
        flat = np.concatenate([m for m in self.visit_months]) if self.visit_months else np.zeros(0)
        offsets = np.cumsum([0] + [len(m) for m in self.visit_months[:-1]])
        return flat[offsets[self.subject] + self.visit]

    @cached_property
    def years(self) -> np.ndarray:
        """Time since baseline per measurement, in years."""
        return self.months / MONTHS_PER_YEAR

    @cached_property
    def measurement_disease(self) -> np.ndarray:
        return self.disease[self.subject]

    @cached_property
    def by_biomarker(self) -> dict[int, np.ndarray]:
        """Ω_k: measurement indices per biomarker."""
        return _group(self.biomarker)

    @cached_property
    def by_subject(self) -> dict[int, np.ndarray]:
        """Ω_i: measurement indices per subject."""
        return _group(self.subject)

    def block_indices(self, disease: int, biomarkers: list[int]) -> np.ndarray:
        """Ω_{d,l}: measurements of subjects with `disease` in `biomarkers`."""
        mask = (self.measurement_disease == disease) & np.isin(self.biomarker, biomarkers)
        return np.flatnonzero(mask)

    def biomarker_index(self, name: str) -> int:
        try:
            return self.biomarkers.index(name)
        except ValueError as e:
            msg = f"Unknown biomarker {name!r}; known: {list(self.biomarkers)}."
            raise UnknownBiomarkerError(msg) from e

    def subset(
        self,
        subjects: list[int] | np.ndarray | None = None,
        biomarkers: list[int] | np.ndarray | None = None,
    ) -> "CohortDataset":
        """Restrict to some subjects and/or biomarkers.

        Subjects are reindexed in the given order; the biomarker axis keeps
        its full name list so indices stay comparable with the source.
        """
        subjects = np.arange(self.n_subjects) if subjects is None else np.asarray(subjects, dtype=np.int64)
        keep = np.isin(self.subject, subjects)
        if biomarkers is not None:
            keep &= np.isin(self.biomarker, np.asarray(biomarkers, dtype=np.int64))
        remap = np.full(self.n_subjects, -1, dtype=np.int64)
        remap[subjects] = np.arange(len(subjects))
        idx = np.flatnonzero(keep)
        order = np.lexsort((self.biomarker[idx], self.visit[idx], remap[self.subject[idx]]))
        idx = idx[order]
        return CohortDataset(
            subject_ids=tuple(self.subject_ids[i] for i in subjects),
            disease=self.disease[subjects],
            diagnosis=tuple(self.diagnosis[i] for i in subjects),
            visit_months=tuple(self.visit_months[i] for i in subjects),
            subject=remap[self.subject[idx]],
            visit=self.visit[idx],
            biomarker=self.biomarker[idx],
            value=self.value[idx],
            biomarkers=self.biomarkers,
            diseases=self.diseases,
        )

    def to_frame(self) -> pd.DataFrame:
        """Long-format view: one row per measurement."""
        return pd.DataFrame(
            {
                "subject_id": [self.subject_ids[i] for i in self.subject],
                "disease": [self.diseases[d] for d in self.measurement_disease],
                "diagnosis": [self.diagnosis[i] for i in self.subject],
                "months_since_baseline": self.months,
                "biomarker": [self.biomarkers[k] for k in self.biomarker],
                "value": self.value,
            },
        )

    def to_wide(self) -> pd.DataFrame:
        """Wide view: one row per visit, one column per biomarker."""
        rows = []
        for i, months in enumerate(self.visit_months):
            for m in months:
                rows.append(
                    {
                        "subject_id": self.subject_ids[i],
                        "disease": self.diseases[self.disease[i]],
                        "diagnosis": self.diagnosis[i],
                        "months_since_baseline": m,
                    },
                )
        wide = pd.DataFrame(rows, columns=["subject_id", "disease", "diagnosis", "months_since_baseline"])
        values = np.full((len(wide), self.n_biomarkers), np.nan)
        offsets = np.cumsum([0] + [len(m) for m in self.visit_months[:-1]]).astype(np.int64)
        if len(self):
            values[offsets[self.subject] + self.visit, self.biomarker] = self.value
        for k, name in enumerate(self.biomarkers):
            wide[name] = values[:, k]
        return wide

    @classmethod
    def from_wide(
        cls,
        frame: pd.DataFrame,
        biomarkers: list[str],
        diseases: list[str] | None = None,
    ) -> "CohortDataset":
        """Build a dataset from a wide table.

        Args:
        ----
            frame: one row per visit with `subject_id`, `disease`,
                `diagnosis`, `months_since_baseline` and one column per
                biomarker; NaN cells are missing measurements.

            biomarkers: biomarker columns, in index order.

            diseases: disease labels in index order. Defaults to the order of
                first appearance.

        """
        if diseases is None:
            diseases = list(dict.fromkeys(frame["disease"].astype(str)))
        diseases = list(diseases)
        unknown = sorted(set(frame["disease"].astype(str)) - set(diseases))
        if unknown:
            msg = f"Diseases {unknown} are not among {diseases}."
            raise DataError(msg)

        subject_ids: list[str] = []
        disease: list[int] = []
        diagnosis: list[str] = []
        visit_months: list[np.ndarray] = []
        subject, visit, biomarker, value = [], [], [], []
        values = frame[biomarkers].to_numpy(dtype=float) if biomarkers else np.zeros((len(frame), 0))
        for subject_id, rows in frame.groupby("subject_id", sort=False).indices.items():
            rows = rows[np.argsort(frame["months_since_baseline"].to_numpy(dtype=float)[rows], kind="stable")]
            labels = frame["disease"].astype(str).to_numpy()[rows]
            if len(set(labels)) != 1:
                msg = f"Subject {subject_id!r} has visits with different diseases."
                raise DataError(msg)
            i = len(subject_ids)
            subject_ids.append(str(subject_id))
            disease.append(diseases.index(labels[0]))
            diagnosis.append(str(frame["diagnosis"].to_numpy()[rows[0]]))
            visit_months.append(frame["months_since_baseline"].to_numpy(dtype=float)[rows])
            for j, row in enumerate(rows):
                present = np.flatnonzero(~np.isnan(values[row]))
                subject.extend([i] * len(present))
                visit.extend([j] * len(present))
                biomarker.extend(present.tolist())
                value.extend(values[row, present].tolist())

        return cls(
            subject_ids=tuple(subject_ids),
            disease=np.asarray(disease, dtype=np.int64),
            diagnosis=tuple(diagnosis),
            visit_months=tuple(visit_months),
            subject=np.asarray(subject, dtype=np.int64),
            visit=np.asarray(visit, dtype=np.int64),
            biomarker=np.asarray(biomarker, dtype=np.int64),
            value=np.asarray(value, dtype=float),
            biomarkers=tuple(biomarkers),
            diseases=tuple(diseases),
        )

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        biomarkers: list[str],
        diseases: list[str] | None = None,
    ) -> "CohortDataset":
        """Inverse of `to_frame`.

        Visits are reconstructed from the distinct months of each subject, so
        visits without any measurement are lost.
        """
        wide = frame.pivot_table(
            index=["subject_id", "disease", "diagnosis", "months_since_baseline"],
            columns="biomarker",
            values="value",
            aggfunc="first",
            sort=False,
        ).reset_index()
        for name in biomarkers:
            if name not in wide.columns:
                wide[name] = np.nan
        return cls.from_wide(wide, biomarkers, diseases)

    def align_to(
        self,
        biomarkers: tuple[str, ...] | list[str],
        diseases: tuple[str, ...] | list[str],
    ) -> "CohortDataset":
        """Re-express the biomarker and disease axes in another ordering.

        Measurements of biomarkers outside `biomarkers` are an error, as are
        subjects whose disease is not among `diseases`.
        """
        biomarkers, diseases = tuple(biomarkers), tuple(diseases)
        if biomarkers == self.biomarkers and diseases == self.diseases:
            return self
        b_map = np.full(self.n_biomarkers, -1, dtype=np.int64)
        for k, name in enumerate(self.biomarkers):
            if name in biomarkers:
                b_map[k] = biomarkers.index(name)
        unknown = sorted({self.biomarkers[k] for k in np.unique(self.biomarker) if b_map[k] < 0})
        if unknown:
            msg = f"Unknown biomarkers {unknown}; known: {list(biomarkers)}."
            raise UnknownBiomarkerError(msg)
        d_map = np.full(len(self.diseases), -1, dtype=np.int64)
        for d, label in enumerate(self.diseases):
            if label in diseases:
                d_map[d] = diseases.index(label)
        unknown = sorted({self.diseases[d] for d in np.unique(self.disease) if d_map[d] < 0})
        if unknown:
            msg = f"Unknown diseases {unknown}; known: {list(diseases)}."
            raise UnknownDiseaseError(msg)
        return CohortDataset(
            subject_ids=self.subject_ids,
            disease=d_map[self.disease],
            diagnosis=self.diagnosis,
            visit_months=self.visit_months,
            subject=self.subject,
            visit=self.visit,
            biomarker=b_map[self.biomarker],
            value=self.value,
            biomarkers=biomarkers,
            diseases=diseases,
        )

    def equals(self, other: "CohortDataset") -> bool:
        """Exact equality of every field."""
        return (
            self.subject_ids == other.subject_ids
            and self.diagnosis == other.diagnosis
            and self.biomarkers == other.biomarkers
            and self.diseases == other.diseases
            and np.array_equal(self.disease, other.disease)
            and len(self.visit_months) == len(other.visit_months)
            and all(np.array_equal(a, b) for a, b in zip(self.visit_months, other.visit_months, strict=True))
            and np.array_equal(self.subject, other.subject)
            and np.array_equal(self.visit, other.visit)
            and np.array_equal(self.biomarker, other.biomarker)
            and np.array_equal(self.value, other.value)
        )


def _group(keys: np.ndarray) -> dict[int, np.ndarray]:
    groups: dict[int, list[int]] = defaultdict(list)
    for idx, key in enumerate(keys.tolist()):
        groups[key].append(idx)
    return {key: np.asarray(idx, dtype=np.int64) for key, idx in groups.items()}
