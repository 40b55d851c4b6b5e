# Simulations package
