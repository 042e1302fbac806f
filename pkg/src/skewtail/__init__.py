"""Densities, tail densities and tail dependence of skew-elliptical laws."""
