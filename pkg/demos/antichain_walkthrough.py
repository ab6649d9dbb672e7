# %% [markdown]
# Building an element incomparable with the square root
#
# The zig-zag search works entirely in ln x / ln y, because its breakpoints
# shrink doubly exponentially.

# %%
import json


from suppexp import chains, poset
from suppexp import extfun as ef

f = ef.sqrt_capped()
tr = chains.antichain_extend([f], stages=6)
print("invariant failures:", chains.check_transcript(tr))

# %%
for s in tr.stages:
    print(f"stage {s.n}: ln x = {float(s.ln_x):.4g}, ln z = {float(s.ln_z):.4g}, "
          f"ln ratios = ({float(s.ln_ratio1):.3g}, {float(s.ln_ratio2):.3g})")

# %%
# both directions fail, with the transcript's own points as witnesses
xs, zs = tr.witness_points()
g = tr.result
for a, b, name in ((g, f, "g in C<f>"), (f, g, "f in C<g>")):
    v = poset.contains_single(a, b, extra_probe_logx=tuple(xs + zs))
    print(name, "->", v.relation, v.certainty)

# %%
# the transcript alone is enough to audit the construction
again = chains.ZigZagTranscript.from_json(json.loads(tr.dumps()))
print("round trip identical:", again.dumps() == tr.dumps())
