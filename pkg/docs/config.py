CUPY=False