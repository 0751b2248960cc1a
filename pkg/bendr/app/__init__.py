""" Application layer: configuration and the core library. """
