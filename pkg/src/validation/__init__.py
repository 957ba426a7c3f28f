"""Independent re-verification of results and documents."""
