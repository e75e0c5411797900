"""
MSE against impropriety and Es/N0
=================================

Sweep the impropriety coefficient k of a flat-spectrum QAM source at
several Es/N0 values. The analytic MSE never increases with k, because
a more improper source gives the widely linear receiver more to exploit.
"""

# %%
import numpy as np

from wltransceiver import optimize_scenario
from wltransceiver.scenario import example_scenario

ks = np.round(np.linspace(0, 1, 6), 2)
esn0s = (0.0, 5.0, 10.0, 15.0)

table = np.array([[optimize_scenario(example_scenario(k, e, N=128)).mse.total
                   for k in ks] for e in esn0s])

# %%
print("Es/N0 [dB] | " + "  ".join(f"k={k:.1f}" for k in ks))
for e, row in zip(esn0s, table):
    print(f"{e:10.0f} | " + "  ".join(f"{v:.4f}" for v in row))

# %%
# Relative gain of a fully improper source over a proper one.
for e, row in zip(esn0s, table):
    print(f"{e:4.0f} dB: {100 * (1 - row[-1] / row[0]):5.1f}% lower MSE")

# %%
# A source with in-phase variance r times the quadrature variance has
# k = (r - 1) / (r + 1); a 4:1 ratio gives k = 0.6 and 9:1 gives 0.8.
from wltransceiver.scenario import unbalanced_qam

for r in (4, 9):
    print(r, unbalanced_qam(r / (r + 1), 1 / (r + 1)).k(0.0))
