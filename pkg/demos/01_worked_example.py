# coding: utf-8

# # A time-dependent system with a translation symmetry
#
# Two degrees of freedom (x, y) with a potential V(y) and a velocity coupling
# that depends on t - x. Nothing here is conserved in the usual sense: L
# depends on time. But shifting x and t together leaves L alone, and that
# shift is what the connection Gamma = (1, 0) describes.

# In[1]:

from connred import symexpr as sx
from connred.geometry import Chart, Connection, LagrangianSystem, energy, poincare_cartan_forms
from connred.dynamics import sode, split_forms, check_projectable, energy_rate
from connred.reduction import flow_auto, reduce, pullback_check
from connred.reconstruction import reconstruction_report

chart = Chart(("x", "y"))
L = sx.parse("1/2*(vx^2 + vy^2) - V(y) + (t - x)*vx + (t - x)*vy", symbols={"V"})
system = LagrangianSystem(chart, L, "EX")
gamma = Connection(chart, (1, 0))
print(chart.coords)


# # Dynamics
#
# The Poincare-Cartan forms and the second-order field X_L solving
# i(X)Omega_L = 0, i(X)dt = 1. V stays an uninterpreted symbol, so V'(y)
# shows up in the acceleration.

# In[2]:

theta, omega = poincare_cartan_forms(system)
X = sode(system)
print("Theta_L:", theta)
print("X_L:", X)


# # The connection energy is conserved
#
# E = p.(v - Gamma) - L. Along X_L its rate is -(j1Y)L, which is zero here.

# In[3]:

E = energy(system, gamma)
print("E:", sx.canon(E))
print("X_L(E) + j1Y(L) =", energy_rate(system, gamma))


# # Horizontal / vertical splitting
#
# Forms split into a part along dt and a vertical part. The vertical pieces
# are invariant under j1Y, so they pass to the quotient.

# In[4]:

sf = split_forms(system, gamma)
print("Theta^V:", sf.theta_v.canon())
rep = check_projectable(system, gamma)
print("projectable:", rep.passed)


# # Reduction
#
# The flow of Gamma is x -> x + s. Moving every point back to the t = 0 slice
# gives coordinates (xbar, ybar, vxbar, vybar) on the quotient, where the
# reduced system is autonomous.

# In[5]:

flow = flow_auto(gamma)
red = reduce(system, gamma, flow)
print("L_bar:", red.L)
print("E_red:", red.energy)
print("X_red:", red.field)


# The reduced system is Hamiltonian but not the Lagrangian system of L_bar:
# its energy differs from the energy of L_bar by

# In[6]:

print("mismatch:", red.mismatch)
print(pullback_check(system, gamma, flow, red).passed)


# # Reconstruction
#
# Lifting the reduced field and adding j1Y gives back X_L exactly.

# In[7]:

rec = reconstruction_report(system, gamma, red)
print("Z:", rec.info["Z"])
print("Z - X_L vanishes:", rec.passed)
