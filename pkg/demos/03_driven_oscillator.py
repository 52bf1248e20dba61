# coding: utf-8

# # An oscillator about a moving equilibrium
#
# L = (v - t)^2 / 2 - (q - t^2/2)^2 / 2. The equilibrium drifts as t^2/2, so
# the usual energy is not conserved. The connection Gamma = t (a field that
# is itself time dependent) is a symmetry. flow_auto integrates it in closed
# form: q -> q + s t + s^2/2.

# In[1]:

from connred import symexpr as sx
from connred.geometry import Chart, Connection, LagrangianSystem, energy, is_symmetry
from connred.integrate import IntegratorConfig, integrate_full
from connred.reduction import flow_auto, flow_validate, reduce

chart = Chart(("q",))
system = LagrangianSystem(chart, sx.parse("1/2*(v - t)^2 - 1/2*(q - t^2/2)^2"), "drift")
gamma = Connection(chart, (sx.parse("t"),))
print(bool(is_symmetry(system, gamma)))


# In[2]:

flow = flow_auto(gamma)
print([str(e) for e in flow.phi], flow.provenance)
print(flow_validate(flow, gamma).passed)


# The reduced system is a plain harmonic oscillator.

# In[3]:

red = reduce(system, gamma, flow)
print("E_red:", red.energy)
print("X_red:", red.field)
print("mismatch:", red.mismatch)


# The connection energy stays put along the full motion while the classical
# energy does not.

# In[4]:

E = energy(system, gamma)
print("E:", sx.canon(E))
run = integrate_full(system, gamma, (0.0, 1.0, 0.0), (0, 6), IntegratorConfig("rk4", step=1e-3))
print("drift of E:", run.drift)
