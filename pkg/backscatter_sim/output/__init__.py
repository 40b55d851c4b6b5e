# Output package
