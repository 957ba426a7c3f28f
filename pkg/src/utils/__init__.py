# Shared utilities: logging, errors, seeding
