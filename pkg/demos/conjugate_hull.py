# %% [markdown]
# Double conjugate of an ISOD function that is not concave
#
# f = min(max(sqrt x, x/2), 3) is subadditive but has a convex kink at x = 4.
# Its double conjugate is the least concave majorant, sandwiched in [f, 2f].

# %%
from fractions import Fraction

import numpy as np

from suppexp import extfun as ef
from suppexp import transforms as tr

f = ef.pointwise_min(ef.pointwise_max(ef.Power(1, Fraction(1, 2)), ef.scale(Fraction(1, 2), ef.identity())),
                     ef.Const(3))
g = tr.double_conjugate(f)
print("kinks:", sorted(tr.kink_points(f)))
print("f ICOD:", ef.check_class(f, "ICOD").status, " f** ICOD:", ef.check_class(g, "ICOD").status)

# %%
xs = np.array([0.5, 2.0, 4.0, 5.0, 6.0, 20.0])
fv, gv = f.eval_array(xs), g.eval_array(xs)
for x, a, b in zip(xs, fv, gv):
    print(f"x = {x:5.1f}   f = {a:.6f}   f** = {b:.6f}   f**/f = {b / a:.4f}")
