"""Network tomography with additive metrics on logical routing trees."""
