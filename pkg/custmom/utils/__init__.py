from .numerical_properties import compound, format_number, format_tstat, significance_stars
