# Command handlers, one per run mode
