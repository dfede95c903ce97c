"""
Parameter vector module.
A flat float64 tensor of all trainable scalars plus its named segment layout.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Tuple

import torch

from utils.exceptions import SegmentMismatchError


@dataclass(frozen=True)
class Segment:
    offset: int
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        size = 1
        for dim in self.shape:
            size *= dim
        return size


class SegmentLayout:
    """Ordered, gap-free mapping of segment names to spans of the flat vector."""

    def __init__(self, segments: Mapping[str, Segment]):
        self._segments = dict(segments)
        expected = 0
        for name, seg in self._segments.items():
            if seg.offset != expected:
                raise SegmentMismatchError(f"Segment '{name}' starts at {seg.offset}, expected {expected}")
            expected += seg.size
        self.total = expected

    @classmethod
    def from_shapes(cls, shapes: Iterable[Tuple[str, Tuple[int, ...]]]) -> "SegmentLayout":
        segments, offset = {}, 0
        for name, shape in shapes:
            seg = Segment(offset=offset, shape=tuple(shape))
            segments[name] = seg
            offset += seg.size
        return cls(segments)

    @classmethod
    def from_dict(cls, data: Mapping[str, List]) -> "SegmentLayout":
        return cls.from_shapes((name, tuple(shape)) for name, shape in data.items())

    def to_dict(self) -> Dict[str, List[int]]:
        return {name: list(seg.shape) for name, seg in self._segments.items()}

    @property
    def names(self) -> List[str]:
        return list(self._segments)

    def items(self):
        return self._segments.items()

    def __getitem__(self, name: str) -> Segment:
        return self._segments[name]

    def __contains__(self, name: str) -> bool:
        return name in self._segments

    def __iter__(self) -> Iterator[str]:
        return iter(self._segments)

    def __eq__(self, other) -> bool:
        return isinstance(other, SegmentLayout) and self._segments == other._segments

    def __repr__(self) -> str:
        return f"SegmentLayout({self.to_dict()})"


class ParamVector:
    """
    Flat parameter vector with named segments.

    unpack() returns views, so autograd through the views reaches `values`.
    """

    def __init__(self, values: torch.Tensor, segments: SegmentLayout):
        if values.ndim != 1 or values.numel() != segments.total:
            raise SegmentMismatchError(
                f"Values of shape {tuple(values.shape)} do not match layout of size {segments.total}"
            )
        self.values = values
        self.segments = segments

    @classmethod
    def pack(cls, tensors: Mapping[str, torch.Tensor], segments: SegmentLayout = None) -> "ParamVector":
        """
        Flatten named tensors into one vector.

        Args:
            tensors: Segment name to tensor
            segments: Expected layout (derived from the tensors if not provided)

        Returns:
            ParamVector

        Raises:
            SegmentMismatchError: If names or shapes disagree with the layout
        """
        if segments is None:
            segments = SegmentLayout.from_shapes((name, tuple(t.shape)) for name, t in tensors.items())
        if list(tensors) != segments.names:
            raise SegmentMismatchError(f"Segments {list(tensors)} do not match {segments.names}")
        for name, tensor in tensors.items():
            if tuple(tensor.shape) != segments[name].shape:
                raise SegmentMismatchError(
                    f"Segment '{name}' has shape {tuple(tensor.shape)}, expected {segments[name].shape}"
                )
        values = torch.cat([tensors[name].reshape(-1) for name in segments.names]).to(torch.float64)
        return cls(values, segments)

    def unpack(self) -> Dict[str, torch.Tensor]:
        return {name: self.segment(name) for name in self.segments}

    def segment(self, name: str) -> torch.Tensor:
        seg = self.segments[name]
        return self.values[seg.offset:seg.offset + seg.size].view(seg.shape)

    def with_values(self, values: torch.Tensor) -> "ParamVector":
        return ParamVector(values, self.segments)

    def detach(self) -> "ParamVector":
        return ParamVector(self.values.detach().clone(), self.segments)

    def __len__(self) -> int:
        return self.segments.total

    def __repr__(self) -> str:
        return f"ParamVector(size={len(self)}, segments={self.segments.names})"
