"""Where limited lemon data sees edges, and where backprojection puts artifacts.

A point at (1, 0, 0) reflected through every plane tangent to the unit
cylinder traces a cardioid; the visibility map counts which edge
directions some data lemon is normal to at each voxel.
"""
import numpy as np

from lemoncst import CylinderDomain, LimitedAxes
from lemoncst.microlocal import DirectionBins, artifact_locus, visibility_map

loc = artifact_locus([1.0, 0.0, 0.0], 360)
print("cardioid xy radius range", loc.xy_radius().min(), loc.xy_radius().max())

bins = DirectionBins(8)
vm = visibility_map(CylinderDomain(), LimitedAxes.default(n_h=11, n_theta=21, n_z=15), bins, 15)
r = vm.coverage.radius()
for lo, hi in [(0, 0.2), (0.2, 0.5), (0.5, 0.8), (0.8, 1.0)]:
    sel = (r >= lo) & (r < hi)
    print(f"coverage for {lo} <= r < {hi}: {vm.coverage.data[sel].mean():.3f}")
up, _ = bins.pole_bins()
print("voxels seeing the vertical bin:", int(vm.occupied[:, up].sum()),
      "at r >=", float(np.round(r.ravel()[vm.occupied[:, up]].min(), 2)))
