"""Shift-invariant directional transform and focus measure."""

from sheetfuse.nsct.transform import NsctCoeffs, nsct_decompose, nsct_reconstruct
from sheetfuse.nsct.focus import focus_measure

__all__ = ["NsctCoeffs", "nsct_decompose", "nsct_reconstruct", "focus_measure"]
