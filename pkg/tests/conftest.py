from mmqs._runtime import tune_allocator

tune_allocator()
