"""Unit conversions.

Internal conventions: density in veh/km, velocity in km/h, flux in veh/h.
The data layer works in metres and seconds; the network solver in SI.
"""

M_PER_KM = 1000.0
S_PER_H = 3600.0


def ms_to_kmh(v):
    return v * (S_PER_H / M_PER_KM)


def kmh_to_ms(v):
    return v * (M_PER_KM / S_PER_H)


def per_m_to_per_km(rho):
    return rho * M_PER_KM


def per_km_to_per_m(rho):
    return rho / M_PER_KM


def per_s_to_per_h(q):
    return q * S_PER_H


def per_h_to_per_s(q):
    return q / S_PER_H
