"""Visual cloze tests (VCTs).

A type-``i`` test (1-based) erases the ``i``-th patch of a cube: the
remaining ``D-1`` patches, in temporal order, are the input, and the erased
patch (plus its flow) is what has to be completed. Type ``D`` erases the
last patch, which makes it ordinary next-frame prediction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class VCT:
    type_idx: int
    patches_in: np.ndarray  # (D-1, h, w, 3)
    target_patch: np.ndarray  # (h, w, 3)
    target_flow: np.ndarray | None  # (h, w, 2)

    def reinsert(self):
        """Put the erased patch back, recovering the original cube."""
        i = self.type_idx - 1
        return np.concatenate([self.patches_in[:i], self.target_patch[None], self.patches_in[i:]])


def _check_type(i, D):
    if not 1 <= i <= D:
        raise ValueError(f"VCT type must lie in 1..{D}, got {i}")


def make_vct(patches, flows, i) -> VCT:
    patches = np.asarray(patches)
    D = len(patches)
    _check_type(i, D)
    keep = [k for k in range(D) if k != i - 1]
    return VCT(i, patches[keep], patches[i - 1], None if flows is None else np.asarray(flows)[i - 1])


def make_all_types(stcs, flows=None, D=None, block_idx=0) -> list["VCTDataset"]:
    """One dataset per type. ``stcs`` is an (N, D, h, w, 3) array or a list
    of :class:`~vcc.events.STC`; ``flows`` likewise (arrays or FlowStacks)."""
    if isinstance(stcs, (list, tuple)):
        if not stcs:
            if D is None:
                raise ValueError("D is required for an empty STC list")
            patches = np.zeros((0, D, 1, 1, 3), np.float32)
            flows = None if flows is None else np.zeros((0, D, 1, 1, 2), np.float32)
        else:
            patches = np.stack([getattr(s, "patches", s) for s in stcs])
            if flows is not None:
                flows = np.stack([getattr(f, "flows", f) for f in flows])
    else:
        patches = np.asarray(stcs)
    return [VCTDataset(patches, flows, i, block_idx) for i in range(1, patches.shape[1] + 1)]


class VCTDataset:
    """Type-``i`` tests over a whole event array, without copying per item.

    ``patches``: (N, D, h, w, 3); ``flows``: (N, D, h, w, 2) or None.
    """

    def __init__(self, patches, flows, type_idx, block_idx=0):
        if flows is not None and flows.shape[:2] != patches.shape[:2]:
            raise ValueError("flow stacks do not align with the cubes")
        self.patches = patches
        self.flows = flows
        self.block_idx = block_idx
        self.D = patches.shape[1]
        _check_type(type_idx, self.D)
        self.type_idx = type_idx
        self._keep = np.array([k for k in range(self.D) if k != type_idx - 1])

    def __len__(self):
        return len(self.patches)

    def inputs(self, idx=slice(None)):
        return self.patches[idx][:, self._keep]

    def target_patches(self, idx=slice(None)):
        return self.patches[idx][:, self.type_idx - 1]

    def target_flows(self, idx=slice(None)):
        if self.flows is None:
            raise ValueError("dataset has no flow stacks")
        return self.flows[idx][:, self.type_idx - 1]

    def __getitem__(self, k) -> VCT:
        return make_vct(self.patches[k], None if self.flows is None else self.flows[k], self.type_idx)
