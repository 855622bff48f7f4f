# keep collection to tests/; examples/ is reference material with its own dependencies
collect_ignore = ["examples", "vendor"]
